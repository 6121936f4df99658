"""Portable float map (PFM) reader/writer.

Grayscale maps use the "Pf" header, 3-channel color maps "PF". Samples are
32-bit floats stored bottom-to-top; the sign of the scale line encodes byte
order (negative = little-endian). NaN samples are preserved, which is how
disparity holes travel through files.
"""

import numpy as np


class PFMError(Exception):
    pass


def read_pfm(path):
    """Read a PFM file into a float32 array, (H, W) or (H, W, 3)."""
    with open(path, "rb") as f:
        header = f.readline().rstrip()
        if header == b"PF":
            channels = 3
        elif header == b"Pf":
            channels = 1
        else:
            raise PFMError(f"{path}: not a PFM file (header {header!r})")

        dims = f.readline().split()
        if len(dims) != 2:
            raise PFMError(f"{path}: bad dimension line")
        width, height = int(dims[0]), int(dims[1])
        if width < 1 or height < 1:
            raise PFMError(f"{path}: bad dimensions {width}x{height}")

        scale = float(f.readline().strip())
        endian = "<" if scale < 0 else ">"

        count = width * height * channels
        buf = f.read(count * 4)
        if len(buf) != count * 4:
            raise PFMError(f"{path}: truncated data section")

    data = np.frombuffer(buf, dtype=endian + "f4").astype(np.float32)
    if channels == 3:
        data = data.reshape(height, width, 3)
    else:
        data = data.reshape(height, width)
    # PFM rows are stored bottom-up
    return np.flipud(data).copy()


def write_pfm(path, data):
    """Write a float32 array, (H, W) or (H, W, 3), as little-endian PFM."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        header = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = b"PF"
    else:
        raise PFMError(f"cannot write array of shape {data.shape} as PFM")

    height, width = data.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{width} {height}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.flipud(data).astype("<f4").tobytes())
