"""sstlf command line: pipeline runner plus per-stage subcommands."""

import glob
import json
import os
import re
import sys

import click
import numpy as np

from . import refine as refine_mod
from . import semantics as sem_mod
from . import stereo as stereo_mod
from .lightfield import ApertureMask, _write_image, load_lightfield
from .pfm import read_pfm, write_pfm
from .pipeline import PipelineConfig, PipelineError, StageError, load_maps, run_pipeline
from .refocus import RenderRequest, refocus
from .render import SSTRequest, WeightParams, focal_sweep, sst_render
from .synth import SceneSpec, render_scene, save_dataset


def _parse_aperture(text, rows, cols):
    if text == "full":
        return ApertureMask.full(rows, cols)
    if text == "center":
        return ApertureMask.center(rows, cols)
    if text.startswith("radius:"):
        return ApertureMask.radius(rows, cols, float(text.split(":", 1)[1]))
    raise click.BadParameter(f"aperture must be full|center|radius:<r>, got {text!r}")


@click.group()
def main():
    """Semantic see-through light-field toolkit."""


@main.command()
@click.option("--spec", required=True, type=click.Path(exists=True), help="scene spec JSON")
@click.option("-o", "--out", required=True, type=click.Path(), help="output dataset dir")
@click.option("--format", "fmt", default="png", type=click.Choice(["png", "pfm"]))
def synth(spec, out, fmt):
    """Render a synthetic light field with ground truth."""
    ds = render_scene(SceneSpec.from_json(spec))
    save_dataset(ds, out, view_format=fmt)
    click.echo(f"wrote {ds.lf.grid_rows}x{ds.lf.grid_cols} dataset to {out}")


@main.command()
@click.option("--lf", "lf_dir", required=True, type=click.Path(exists=True))
@click.option("--p1", default=1.0, show_default=True)
@click.option("--p2", default=8.0, show_default=True)
@click.option("--alpha", default=0.7, show_default=True)
@click.option("--eps-i", default=0.03, show_default=True)
@click.option("--tau-c", default=0.03, show_default=True)
@click.option("--l-max", default=17, show_default=True)
@click.option("-o", "--out", required=True, type=click.Path())
def stereo(lf_dir, p1, p2, alpha, eps_i, tau_c, l_max, out):
    """Per-view disparity maps (disp_<s>_<t>.pfm)."""
    lf = load_lightfield(lf_dir)
    params = stereo_mod.StereoParams(alpha=alpha, p1=p1, p2=p2, tau_c=tau_c,
                                     l_max=l_max, eps_i=eps_i)
    maps = stereo_mod.lf_disparity(lf, params=params)
    os.makedirs(out, exist_ok=True)
    for (s, t), dm in sorted(maps.items()):
        write_pfm(os.path.join(out, f"disp_{s}_{t}.pfm"), dm)
    click.echo(f"wrote {len(maps)} disparity maps to {out}")


@main.group()
def semantics():
    """Label-probability ingestion commands."""


@semantics.command()
@click.option("--probs", "probs_dir", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True),
              help="manually labeled view (indexed PNG)")
@click.option("--gt-view", default=None, help="view id 's_t' matching --gt (default: central)")
@click.option("--m", "m_exp", default=4.0, show_default=True)
@click.option("-o", "--out", required=True, type=click.Path())
def hcsm(probs_dir, gt_path, gt_view, m_exp, out):
    """Entropy maps, MAP labels and high-confidence masks for all views."""
    views = sem_mod.list_prob_views(probs_dir)
    if not views:
        raise click.ClickException(f"no probability volumes in {probs_dir}")
    if gt_view is None:
        s_c = max(s for s, _ in views) // 2
        t_c = max(t for _, t in views) // 2
        gt_view = f"{s_c}_{t_c}"
    gt = sem_mod.load_semantic_map(gt_path)
    vol = sem_mod.load_prob_volume(probs_dir, gt_view)
    eps, acc, cvg, score = sem_mod.score_threshold(vol, sem_mod.map_labels(vol), gt, m=m_exp)
    os.makedirs(out, exist_ok=True)
    for s, t in views:
        vol = sem_mod.load_prob_volume(probs_dir, f"{s}_{t}")
        labels = sem_mod.map_labels(vol)
        mask = sem_mod.hcsm_filter(vol, labels, eps)
        sem_mod.save_semantic_map(os.path.join(out, f"map_{s}_{t}.png"), labels)
        sem_mod.save_semantic_map(os.path.join(out, f"hcsm_{s}_{t}.png"),
                                  mask.confident.astype(np.uint8))
        write_pfm(os.path.join(out, f"ent_{s}_{t}.pfm"), mask.entropy)
    with open(os.path.join(out, "semantics.json"), "w") as f:
        json.dump({"epsilon_h": eps, "accuracy": acc, "coverage": cvg,
                   "score": score, "m": m_exp}, f, indent=2)
    click.echo(f"epsilon_H={eps:.4f} acc={acc:.3f} cvg={cvg:.3f} score={score:.4f}")


@main.command()
@click.option("--hcsm", "hcsm_dir", required=True, type=click.Path(exists=True))
@click.option("--disp", "disp_dir", required=True, type=click.Path(exists=True))
@click.option("--classes", "classes_path", required=True, type=click.Path(exists=True),
              help="classes.json or palette.json with class names")
@click.option("--eps-d", default=0.1, show_default=True)
@click.option("--pn", default=1.0, show_default=True)
@click.option("--pd", default=1.0, show_default=True)
@click.option("--tau", default=0.5, show_default=True)
@click.option("--ground", default=None, help="ground class name override")
@click.option("-o", "--out", required=True, type=click.Path())
def refine(hcsm_dir, disp_dir, classes_path, eps_d, pn, pd, tau, ground, out):
    """Disparity-guided label refinement (sem_<s>_<t>.png + palette)."""
    with open(classes_path) as f:
        raw = json.load(f)
    classes = raw["classes"] if "classes" in raw else sem_mod.load_palette(classes_path)
    ground_names = (ground,) if ground else refine_mod.GROUND_NAMES
    params = refine_mod.RefineParams(eps_d=eps_d, p_n=pn, p_d=pd, tau=tau,
                                     ground_names=ground_names)

    triples = {}
    for p in sorted(glob.glob(os.path.join(hcsm_dir, "map_*_*.png"))):
        s, t = map(int, re.match(r"map_(\d+)_(\d+)\.png", os.path.basename(p)).groups())
        labels = sem_mod.load_semantic_map(p)
        conf = sem_mod.load_semantic_map(os.path.join(hcsm_dir, f"hcsm_{s}_{t}.png")) > 0
        disp = read_pfm(os.path.join(disp_dir, f"disp_{s}_{t}.pfm"))
        triples[(s, t)] = (conf, labels, disp)
    if not triples:
        raise click.ClickException(f"no HCSM maps in {hcsm_dir}")
    model = refine_mod.fit_models([v[0] for v in triples.values()],
                                  [v[1] for v in triples.values()],
                                  [v[2] for v in triples.values()],
                                  sigma_min=params.sigma_min,
                                  min_support=params.min_support)
    os.makedirs(out, exist_ok=True)
    for (s, t), (conf, labels, disp) in sorted(triples.items()):
        refined = refine_mod.refine_labels(conf, labels, disp, classes=classes,
                                           params=params, model=model)
        sem_mod.save_semantic_map(os.path.join(out, f"sem_{s}_{t}.png"), refined)
    sem_mod.save_palette(os.path.join(out, "palette.json"), classes)
    click.echo(f"wrote {len(triples)} refined maps to {out}")


@main.command("refocus")
@click.option("--lf", "lf_dir", required=True, type=click.Path(exists=True))
@click.option("--df", "d_f", required=True, type=float)
@click.option("--aperture", default="full", show_default=True)
@click.option("-o", "--out", required=True, type=click.Path())
def refocus_cmd(lf_dir, d_f, aperture, out):
    """Regular synthetic-aperture refocusing."""
    lf = load_lightfield(lf_dir)
    ap = _parse_aperture(aperture, lf.grid_rows, lf.grid_cols)
    img, _ = refocus(lf, RenderRequest(d_f=d_f, aperture=ap))
    _write_image(out, img)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--lf", "lf_dir", required=True, type=click.Path(exists=True))
@click.option("--disp", "disp_dir", required=True, type=click.Path(exists=True))
@click.option("--sem", "sem_dir", required=True, type=click.Path(exists=True))
@click.option("--df", "d_f", required=True, type=float)
@click.option("--sigma-d", default=0.5, show_default=True)
@click.option("--c1", default=0.1, show_default=True)
@click.option("--c2", default=0.05, show_default=True)
@click.option("--target", default=None, help="target class name to keep clear")
@click.option("--suppress-factor", default=2.0, show_default=True)
@click.option("--aperture", default="full", show_default=True)
@click.option("--sweep", default=None, help="d0:d1:n focal sweep instead of one frame")
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--valid-mask", default=None, type=click.Path(), help="write validity mask PNG")
def sst(lf_dir, disp_dir, sem_dir, d_f, sigma_d, c1, c2, target, suppress_factor,
        aperture, sweep, out, valid_mask):
    """Semantic see-through render."""
    lf = load_lightfield(lf_dir)
    classes = sem_mod.load_palette(os.path.join(sem_dir, "palette.json"))
    disps, semmaps = {}, {}
    for s, t in lf.grid_positions():
        disps[(s, t)] = read_pfm(os.path.join(disp_dir, f"disp_{s}_{t}.pfm"))
        semmaps[(s, t)] = sem_mod.load_semantic_map(os.path.join(sem_dir, f"sem_{s}_{t}.png"))
    target_label = None
    if target is not None:
        if target not in classes:
            raise click.ClickException(f"target {target!r} not in palette {classes}")
        target_label = classes.index(target)
    params = WeightParams(sigma_d=sigma_d, c1=c1, c2=c2, target_label=target_label,
                          suppress_factor=suppress_factor)
    ap = _parse_aperture(aperture, lf.grid_rows, lf.grid_cols)

    if sweep:
        d0, d1, n = sweep.split(":")
        values = np.linspace(float(d0), float(d1), int(n))
        frames = focal_sweep(lf, disps, semmaps, values, params=params, aperture=ap)
        base, ext = os.path.splitext(out)
        for i, frame in enumerate(frames):
            _write_image(f"{base}_{i:03d}{ext}", frame)
        click.echo(f"wrote {len(frames)} sweep frames")
        return
    img, valid = sst_render(lf, disps, semmaps,
                            SSTRequest(d_f=d_f, aperture=ap, params=params))
    _write_image(out, img)
    if valid_mask:
        _write_image(valid_mask, valid.astype(np.float32))
    click.echo(f"wrote {out}")


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--workdir", required=True, type=click.Path())
@click.option("--set", "overrides", multiple=True, help="section.key=value override")
def run(config_path, workdir, overrides):
    """Run the staged pipeline (synth -> stereo -> semantics -> refine -> render)."""
    cfg = PipelineConfig.from_toml(config_path) if config_path else PipelineConfig.default()
    cfg.apply_overrides(overrides)
    try:
        report = run_pipeline(cfg, workdir)
    except (PipelineError, StageError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    for stage, info in report.items():
        n = len(info.get("outputs", []))
        click.echo(f"{stage:10s} {info['status']}" + (f" ({n} outputs)" if n else ""))


@main.command()
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(data_dir, port, host):
    """HTTP render service for the interactive viewer."""
    import uvicorn

    from .serve import create_app

    uvicorn.run(create_app(data_dir), host=host, port=port)


if __name__ == "__main__":
    main()
