#!/usr/bin/env python3
"""Capture real render-service responses as viewer test fixtures.

Builds the occluded synthetic dataset, runs the actual HTTP app against
it, and stores the wire bytes (dataset listing, label PNG, renders with
and without a see-through target) plus decoded RGBA dumps so the tests
can measure pixel differences without a PNG decoder.

Regenerate with:  python scripts/make_fixtures.py
"""

import io
import json
import os

import numpy as np
from fastapi.testclient import TestClient
from PIL import Image

from sstlf.pfm import write_pfm
from sstlf.semantics import save_palette, save_semantic_map
from sstlf.serve import create_app
from sstlf.synth import Layer, SceneSpec, render_scene, save_dataset

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURES = os.path.join(HERE, "..", "tests", "fixtures")


def build_dataset(root):
    spec = SceneSpec(
        width=96, height=80, grid_rows=3, grid_cols=3,
        classes=["background", "floor", "horse", "bicycle"],
        layers=[
            Layer(label=1, disparity=0.5, texture_seed=3),
            Layer(label=2, disparity=4.0, grad_u=0.02, extent=(10, 8, 86, 72),
                  texture_seed=4),
            Layer(label=3, disparity=4.8, grad_u=0.02, extent=(36, 24, 60, 56),
                  texture_seed=5),
        ],
        seed=33,
    )
    ds = render_scene(spec)
    path = os.path.join(root, "toy")
    save_dataset(ds, path)
    os.makedirs(os.path.join(path, "disp"), exist_ok=True)
    os.makedirs(os.path.join(path, "sem"), exist_ok=True)
    for (s, t), dm in ds.disparity.items():
        write_pfm(os.path.join(path, "disp", f"disp_{s}_{t}.pfm"), dm)
    for (s, t), lab in ds.labels.items():
        save_semantic_map(os.path.join(path, "sem", f"sem_{s}_{t}.png"), lab)
    save_palette(os.path.join(path, "sem", "palette.json"), ds.classes)
    return ds


def dump(name, data):
    with open(os.path.join(FIXTURES, name), "wb") as f:
        f.write(data)
    print(f"  {name}: {len(data)} bytes")


def png_to_rgba(png_bytes):
    img = Image.open(io.BytesIO(png_bytes)).convert("RGBA")
    return img.tobytes()


def main():
    os.makedirs(FIXTURES, exist_ok=True)
    import tempfile

    with tempfile.TemporaryDirectory() as root:
        ds = build_dataset(root)
        client = TestClient(create_app(root))

        listing = client.get("/datasets")
        assert listing.status_code == 200, listing.text
        dump("datasets.json", listing.content)

        labels = client.get("/datasets/toy/labels.png")
        assert labels.status_code == 200
        dump("labels.png", labels.content)
        dump("labels.bin", ds.labels[(1, 1)].astype(np.uint8).tobytes())

        # focus on the horse (label 2); the bicycle overlaps its range
        info = listing.json()[0]
        d_f = 4.7
        base = {"dataset": "toy", "d_f": d_f, "sigma_d": 1.0,
                "c1": 0.2, "c2": 0.2}
        for name, body in [
            ("render_no_target", {**base, "mode": "sst"}),
            ("render_with_target", {**base, "mode": "sst", "target_label": 2}),
            ("render_regular", {**base, "mode": "regular"}),
        ]:
            resp = client.post("/render", json=body)
            assert resp.status_code == 200, resp.text
            dump(f"{name}.png", resp.content)
            dump(f"{name}.rgba", png_to_rgba(resp.content))

        meta = {"width": info["width"], "height": info["height"], "d_f": d_f}
        with open(os.path.join(FIXTURES, "meta.json"), "w") as f:
            json.dump(meta, f, indent=2)
        print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
