"""Stage runner: synth -> stereo -> semantics -> refine -> render.

Each stage hashes its inputs (files + parameters) and records its outputs
in a workdir manifest; re-runs with unchanged inputs are skipped. All
stage parameters live in one TOML config, overridable from the CLI with
section.key=value strings.
"""

import glob
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np
import tomli

from . import refine as refine_mod
from . import semantics as sem_mod
from . import stereo as stereo_mod
from .lightfield import _write_image, load_lightfield
from .pfm import read_pfm, write_pfm
from .refocus import RenderRequest, refocus
from .render import SSTRequest, WeightParams, sst_render
from .synth import SceneSpec, render_scene, save_dataset


class PipelineError(Exception):
    pass


class StageError(PipelineError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


DEFAULTS = {
    "stages": {"synth": True, "stereo": True, "semantics": True,
               "refine": True, "render": True},
    "synth": {"spec": ""},
    "stereo": {"p1": 1.0, "p2": 8.0, "alpha": 0.7, "tau_c": 0.03,
               "l_max": 17, "eps_i": 0.03},
    "semantics": {"m": 4.0, "gt_view": ""},
    "refine": {"eps_d": 0.1, "sigma_min": 0.25, "min_support": 50,
               "p_n": 1.0, "p_d": 1.0, "tau": 0.5, "ground": ""},
    "render": {"sigma_d": 0.5, "c1": 0.1, "c2": 0.05,
               "suppress_factor": 2.0, "d_f": [3.0], "target": ""},
}

_RANGES = {
    ("stereo", "p1"): (0.0, None), ("stereo", "p2"): (0.0, None),
    ("stereo", "alpha"): (0.0, 1.0), ("stereo", "tau_c"): (0.0, None),
    ("stereo", "l_max"): (1, 64), ("stereo", "eps_i"): (1e-9, None),
    ("semantics", "m"): (1e-9, None),
    ("refine", "eps_d"): (1e-9, 1.0), ("refine", "sigma_min"): (1e-9, None),
    ("refine", "min_support"): (1, None),
    ("refine", "p_n"): (0.0, None), ("refine", "p_d"): (0.0, None),
    ("refine", "tau"): (1e-9, None),
    ("render", "sigma_d"): (1e-9, None), ("render", "c1"): (0.0, 1.0),
    ("render", "c2"): (0.0, 1.0), ("render", "suppress_factor"): (1.0, None),
}


@dataclass
class PipelineConfig:
    sections: dict

    @classmethod
    def default(cls):
        return cls(sections=json.loads(json.dumps(DEFAULTS)))

    @classmethod
    def from_toml(cls, path):
        cfg = cls.default()
        with open(path, "rb") as f:
            raw = tomli.load(f)
        for section, values in raw.items():
            if section not in cfg.sections:
                raise PipelineError(f"unknown config section [{section}]")
            for key, val in values.items():
                if key not in cfg.sections[section]:
                    raise PipelineError(f"unknown config key {section}.{key}")
                cfg.sections[section][key] = val
        cfg.validate()
        return cfg

    def apply_overrides(self, pairs):
        """CLI overrides like 'stereo.p2=4.0'; highest precedence."""
        for pair in pairs:
            if "=" not in pair or "." not in pair.split("=", 1)[0]:
                raise PipelineError(f"override must be section.key=value, got {pair!r}")
            target, val = pair.split("=", 1)
            section, key = target.split(".", 1)
            if section not in self.sections or key not in self.sections[section]:
                raise PipelineError(f"unknown config key {target}")
            current = self.sections[section][key]
            if isinstance(current, bool):
                self.sections[section][key] = val.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                self.sections[section][key] = int(val)
            elif isinstance(current, float):
                self.sections[section][key] = float(val)
            elif isinstance(current, list):
                self.sections[section][key] = [float(x) for x in val.split(",")]
            else:
                self.sections[section][key] = val
        self.validate()
        return self

    def validate(self):
        for (section, key), (lo, hi) in _RANGES.items():
            val = self.sections[section][key]
            if lo is not None and val < lo:
                raise PipelineError(f"{section}.{key} = {val} below minimum {lo}")
            if hi is not None and val > hi:
                raise PipelineError(f"{section}.{key} = {val} above maximum {hi}")

    def __getitem__(self, section):
        return self.sections[section]


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_hash(paths, params):
    h = hashlib.sha256()
    for p in sorted(paths):
        h.update(p.encode())
        h.update(_sha256_file(p).encode())
    h.update(json.dumps(params, sort_keys=True).encode())
    return h.hexdigest()


class _Manifest:
    def __init__(self, workdir):
        self.path = os.path.join(workdir, "pipeline_manifest.json")
        self.workdir = workdir
        if os.path.exists(self.path):
            with open(self.path) as f:
                self.stages = json.load(f).get("stages", {})
        else:
            self.stages = {}

    def fresh(self, stage, input_hash):
        entry = self.stages.get(stage)
        if not entry or entry["input_hash"] != input_hash:
            return False
        for rel, digest in entry["outputs"].items():
            p = os.path.join(self.workdir, rel)
            if not os.path.exists(p) or _sha256_file(p) != digest:
                return False
        return True

    def record(self, stage, input_hash, output_paths):
        outputs = {}
        for p in sorted(output_paths):
            rel = os.path.relpath(p, self.workdir)
            outputs[rel] = _sha256_file(p)
        self.stages[stage] = {"input_hash": input_hash, "outputs": outputs}
        with open(self.path, "w") as f:
            json.dump({"stages": self.stages}, f, indent=2, sort_keys=True)


def _grid_views(workdir):
    lf = load_lightfield(workdir)
    return lf


def _view_files(workdir):
    m = json.load(open(os.path.join(workdir, "manifest.json")))
    pattern = m.get("view_pattern", "view_{s}_{t}.png")
    return [os.path.join(workdir, pattern.format(s=s, t=t))
            for t in range(m["grid_rows"]) for s in range(m["grid_cols"])]


def _stage_synth(cfg, workdir):
    spec_path = cfg["synth"]["spec"]
    if not spec_path:
        raise PipelineError("synth stage enabled but no scene spec configured")
    spec = SceneSpec.from_json(spec_path)
    ds = render_scene(spec)
    save_dataset(ds, workdir)
    outputs = _view_files(workdir) + [os.path.join(workdir, "manifest.json")]
    for sub in ("probs", "gt"):
        d = os.path.join(workdir, sub)
        outputs += [os.path.join(d, f) for f in sorted(os.listdir(d))]
    return outputs


def _stage_stereo(cfg, workdir):
    lf = _grid_views(workdir)
    sc = cfg["stereo"]
    params = stereo_mod.StereoParams(alpha=sc["alpha"], p1=sc["p1"], p2=sc["p2"],
                                     tau_c=sc["tau_c"], l_max=int(sc["l_max"]),
                                     eps_i=sc["eps_i"])
    maps = stereo_mod.lf_disparity(lf, params=params)
    disp_dir = os.path.join(workdir, "disp")
    os.makedirs(disp_dir, exist_ok=True)
    outputs = []
    for (s, t), dm in sorted(maps.items()):
        p = os.path.join(disp_dir, f"disp_{s}_{t}.pfm")
        write_pfm(p, dm)
        outputs.append(p)
    return outputs


def _stage_semantics(cfg, workdir):
    probs_dir = os.path.join(workdir, "probs")
    if not os.path.isdir(probs_dir):
        raise PipelineError(f"no probability volumes at {probs_dir}")
    views = sem_mod.list_prob_views(probs_dir)
    if not views:
        raise PipelineError(f"no probability volumes at {probs_dir}")
    classes = sem_mod.load_classes(probs_dir)

    lf = _grid_views(workdir)
    s_c, t_c = lf.center
    gt_path = cfg["semantics"]["gt_view"] or os.path.join(workdir, "gt", f"sem_{s_c}_{t_c}.png")
    if not os.path.exists(gt_path):
        raise PipelineError(f"no labeled reference view at {gt_path}")
    gt = sem_mod.load_semantic_map(gt_path)

    center_vol = sem_mod.load_prob_volume(probs_dir, f"{s_c}_{t_c}")
    center_map = sem_mod.map_labels(center_vol)
    eps, acc, cvg, score = sem_mod.score_threshold(center_vol, center_map, gt,
                                                   m=cfg["semantics"]["m"])

    out_dir = os.path.join(workdir, "hcsm")
    os.makedirs(out_dir, exist_ok=True)
    outputs = []
    for s, t in views:
        vol = sem_mod.load_prob_volume(probs_dir, f"{s}_{t}")
        labels = sem_mod.map_labels(vol)
        mask = sem_mod.hcsm_filter(vol, labels, eps)
        p_map = os.path.join(out_dir, f"map_{s}_{t}.png")
        p_conf = os.path.join(out_dir, f"hcsm_{s}_{t}.png")
        p_ent = os.path.join(out_dir, f"ent_{s}_{t}.pfm")
        sem_mod.save_semantic_map(p_map, labels)
        sem_mod.save_semantic_map(p_conf, mask.confident.astype(np.uint8))
        write_pfm(p_ent, mask.entropy)
        outputs += [p_map, p_conf, p_ent]
    meta = os.path.join(out_dir, "semantics.json")
    with open(meta, "w") as f:
        json.dump({"epsilon_h": eps, "accuracy": acc, "coverage": cvg,
                   "score": score, "m": cfg["semantics"]["m"],
                   "classes": classes}, f, indent=2)
    return outputs + [meta]


def _stage_refine(cfg, workdir):
    probs_dir = os.path.join(workdir, "probs")
    classes = sem_mod.load_classes(probs_dir)
    hcsm_dir = os.path.join(workdir, "hcsm")
    disp_dir = os.path.join(workdir, "disp")
    rc = cfg["refine"]
    ground_names = (rc["ground"],) if rc["ground"] else refine_mod.GROUND_NAMES
    params = refine_mod.RefineParams(eps_d=rc["eps_d"], sigma_min=rc["sigma_min"],
                                     min_support=int(rc["min_support"]), p_n=rc["p_n"],
                                     p_d=rc["p_d"], tau=rc["tau"],
                                     ground_names=ground_names)

    views = sem_mod.list_prob_views(probs_dir)
    triples = {}
    for s, t in views:
        labels = sem_mod.load_semantic_map(os.path.join(hcsm_dir, f"map_{s}_{t}.png"))
        conf = sem_mod.load_semantic_map(os.path.join(hcsm_dir, f"hcsm_{s}_{t}.png")) > 0
        disp = read_pfm(os.path.join(disp_dir, f"disp_{s}_{t}.pfm"))
        triples[(s, t)] = (conf, labels, disp)

    model = refine_mod.fit_models([v[0] for v in triples.values()],
                                  [v[1] for v in triples.values()],
                                  [v[2] for v in triples.values()],
                                  sigma_min=params.sigma_min,
                                  min_support=params.min_support)
    out_dir = os.path.join(workdir, "sem")
    os.makedirs(out_dir, exist_ok=True)
    outputs = []
    for (s, t), (conf, labels, disp) in sorted(triples.items()):
        refined = refine_mod.refine_labels(conf, labels, disp, classes=classes,
                                           params=params, model=model)
        p = os.path.join(out_dir, f"sem_{s}_{t}.png")
        sem_mod.save_semantic_map(p, refined)
        outputs.append(p)
    palette = os.path.join(out_dir, "palette.json")
    sem_mod.save_palette(palette, classes)
    return outputs + [palette]


def load_maps(workdir):
    """(disps, semmaps, classes) as written by the stereo/refine stages."""
    disp_dir = os.path.join(workdir, "disp")
    sem_dir = os.path.join(workdir, "sem")
    classes = sem_mod.load_palette(os.path.join(sem_dir, "palette.json"))
    lf_manifest = json.load(open(os.path.join(workdir, "manifest.json")))
    disps, semmaps = {}, {}
    for t in range(lf_manifest["grid_rows"]):
        for s in range(lf_manifest["grid_cols"]):
            disps[(s, t)] = read_pfm(os.path.join(disp_dir, f"disp_{s}_{t}.pfm"))
            semmaps[(s, t)] = sem_mod.load_semantic_map(os.path.join(sem_dir, f"sem_{s}_{t}.png"))
    return disps, semmaps, classes


def _stage_render(cfg, workdir):
    lf = _grid_views(workdir)
    disps, semmaps, classes = load_maps(workdir)
    rc = cfg["render"]
    target = None
    if rc["target"]:
        if rc["target"] not in classes:
            raise PipelineError(f"target class {rc['target']!r} not in palette")
        target = classes.index(rc["target"])
    params = WeightParams(sigma_d=rc["sigma_d"], c1=rc["c1"], c2=rc["c2"],
                          target_label=target, suppress_factor=rc["suppress_factor"])
    out_dir = os.path.join(workdir, "renders")
    os.makedirs(out_dir, exist_ok=True)
    outputs = []
    for d_f in rc["d_f"]:
        tag = f"{d_f:g}".replace("-", "m").replace(".", "p")
        sst_img, _ = sst_render(lf, disps, semmaps, SSTRequest(d_f=d_f, params=params))
        reg_img, _ = refocus(lf, RenderRequest(d_f=d_f))
        p_sst = os.path.join(out_dir, f"sst_df_{tag}.png")
        p_reg = os.path.join(out_dir, f"regular_df_{tag}.png")
        _write_image(p_sst, sst_img)
        _write_image(p_reg, reg_img)
        outputs += [p_sst, p_reg]
    return outputs


_STAGES = [
    ("synth", _stage_synth,
     lambda cfg, wd: ([cfg["synth"]["spec"]] if cfg["synth"]["spec"] else [], cfg["synth"])),
    ("stereo", _stage_stereo, lambda cfg, wd: (_view_files(wd), cfg["stereo"])),
    ("semantics", _stage_semantics,
     lambda cfg, wd: (sorted(glob.glob(os.path.join(wd, "probs", "*"))
                             + glob.glob(os.path.join(wd, "gt", "sem_*.png"))),
                      cfg["semantics"])),
    ("refine", _stage_refine,
     lambda cfg, wd: (sorted(glob.glob(os.path.join(wd, "hcsm", "*"))
                             + glob.glob(os.path.join(wd, "disp", "*.pfm"))),
                      cfg["refine"])),
    ("render", _stage_render,
     lambda cfg, wd: (sorted(glob.glob(os.path.join(wd, "disp", "*.pfm"))
                             + glob.glob(os.path.join(wd, "sem", "*"))
                             + _view_files(wd)),
                      cfg["render"])),
]


def run_pipeline(config, workdir):
    """Run enabled stages in order; returns {stage: {status, outputs}}.

    A stage whose inputs (files + parameters) hash to the same value as the
    recorded run, and whose outputs are intact, is skipped.
    """
    os.makedirs(workdir, exist_ok=True)
    manifest = _Manifest(workdir)
    report = {}
    for name, fn, kh in _STAGES:
        if not config["stages"].get(name, True):
            report[name] = {"status": "disabled"}
            continue
        try:
            in_files, params = kh(config, workdir)
            ih = _input_hash(in_files, params)
            if manifest.fresh(name, ih):
                report[name] = {"status": "skipped",
                                "outputs": sorted(manifest.stages[name]["outputs"])}
                continue
            outputs = fn(config, workdir)
            manifest.record(name, ih, outputs)
            report[name] = {"status": "ran",
                            "outputs": sorted(os.path.relpath(p, workdir) for p in outputs)}
        except Exception as e:
            raise StageError(name, e) from e
    return report
