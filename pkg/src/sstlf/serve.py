"""HTTP render service backing the interactive viewer.

Datasets (pipeline output directories) are loaded once at startup and held
immutable; every render request is computed synchronously against them
under a worker-count bound. Identical requests produce identical PNG
bytes.
"""

import io
import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel

from .lightfield import ApertureMask, load_lightfield
from .pipeline import load_maps
from .refocus import RenderRequest, refocus
from .render import SSTRequest, WeightParams, sst_render

log = logging.getLogger("sstlf.serve")


@dataclass
class Dataset:
    name: str
    lf: object
    disps: dict
    semmaps: dict
    classes: list

    def info(self):
        lo, hi = self.lf.disparity_range
        return {
            "id": self.name,
            "grid_rows": self.lf.grid_rows,
            "grid_cols": self.lf.grid_cols,
            "width": self.lf.width,
            "height": self.lf.height,
            "disparity_range": [lo, hi],
            "classes": {str(i): name for i, name in enumerate(self.classes)},
        }


def _load_dataset(path):
    lf = load_lightfield(path)
    disps, semmaps, classes = load_maps(path)
    return Dataset(name=os.path.basename(os.path.normpath(path)), lf=lf,
                   disps=disps, semmaps=semmaps, classes=classes)


def load_datasets(data_dir):
    """Every subdirectory with a manifest is a dataset; the root itself may
    be one. Corrupt directories are skipped with a warning."""
    candidates = []
    if os.path.exists(os.path.join(data_dir, "manifest.json")):
        candidates.append(data_dir)
    else:
        for entry in sorted(os.listdir(data_dir)):
            p = os.path.join(data_dir, entry)
            if os.path.isdir(p) and os.path.exists(os.path.join(p, "manifest.json")):
                candidates.append(p)
    datasets = {}
    for path in candidates:
        try:
            ds = _load_dataset(path)
            datasets[ds.name] = ds
        except Exception as e:
            log.warning("skipping dataset %s: %s", path, e)
    return datasets


class RenderBody(BaseModel):
    dataset: str
    d_f: float
    sigma_d: float = 0.5
    c1: float = 0.1
    c2: float = 0.05
    target_label: Optional[int] = None
    mode: str = "sst"
    aperture: str = "full"


def _png_bytes(img):
    arr = np.clip(np.asarray(img, dtype=np.float32), 0.0, 1.0)
    out = np.round(arr * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(out).save(buf, format="PNG")
    return buf.getvalue()


def create_app(data_dir, ui_dir=None):
    app = FastAPI(title="sstlf render service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    datasets = load_datasets(data_dir)
    render_slots = threading.Semaphore(max(1, os.cpu_count() or 1))

    @app.get("/datasets")
    def list_datasets():
        return [ds.info() for ds in datasets.values()]

    @app.get("/datasets/{name}/labels.png")
    def labels_png(name: str):
        ds = datasets.get(name)
        if ds is None:
            return JSONResponse({"error": f"unknown dataset {name!r}"}, status_code=404)
        labels = ds.semmaps[ds.lf.center].astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(labels, mode="L").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/datasets/{name}/view.png")
    def view_png(name: str):
        ds = datasets.get(name)
        if ds is None:
            return JSONResponse({"error": f"unknown dataset {name!r}"}, status_code=404)
        s, t = ds.lf.center
        return Response(content=_png_bytes(ds.lf.view(s, t)), media_type="image/png")

    @app.post("/render")
    def render(body: RenderBody):
        ds = datasets.get(body.dataset)
        if ds is None:
            return JSONResponse({"error": f"unknown dataset {body.dataset!r}"},
                                status_code=404)
        lo, hi = ds.lf.disparity_range
        if not lo <= body.d_f <= hi:
            return JSONResponse({"error": f"d_f outside [{lo}, {hi}]"}, status_code=400)
        if body.sigma_d <= 0 or not (0 <= body.c1 <= 1) or not (0 <= body.c2 <= 1):
            return JSONResponse({"error": "sigma_d must be > 0, C1/C2 in [0, 1]"},
                                status_code=400)
        if body.mode not in ("sst", "regular"):
            return JSONResponse({"error": f"unknown mode {body.mode!r}"}, status_code=400)
        if body.target_label is not None and not 0 <= body.target_label < len(ds.classes):
            return JSONResponse({"error": f"target_label {body.target_label} not in palette"},
                                status_code=422)

        aperture = None
        if body.aperture == "center":
            aperture = ApertureMask.center(ds.lf.grid_rows, ds.lf.grid_cols)
        elif body.aperture.startswith("radius:"):
            aperture = ApertureMask.radius(ds.lf.grid_rows, ds.lf.grid_cols,
                                           float(body.aperture.split(":", 1)[1]))
        elif body.aperture != "full":
            return JSONResponse({"error": f"bad aperture {body.aperture!r}"}, status_code=400)

        start = time.perf_counter()
        with render_slots:
            if body.mode == "regular":
                img, _ = refocus(ds.lf, RenderRequest(d_f=body.d_f, aperture=aperture))
            else:
                params = WeightParams(sigma_d=body.sigma_d, c1=body.c1, c2=body.c2,
                                      target_label=body.target_label)
                img, _ = sst_render(ds.lf, ds.disps, ds.semmaps,
                                    SSTRequest(d_f=body.d_f, aperture=aperture,
                                               params=params))
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        return Response(content=_png_bytes(img), media_type="image/png",
                        headers={"X-Render-Ms": f"{elapsed_ms:.1f}"})

    if ui_dir is None:
        ui_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(
            os.path.abspath(__file__)))), "frontend", "dist")
    if os.path.isdir(ui_dir):
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
