"""Dataset persistence: run manifests, segment maps, trace tables, reports.

All writes go through a temp-file-plus-rename so readers never observe a
half-written file. Tabular data is CSV with a header row; reports are JSON.
"""

import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .device import DefectRecord, Ensemble, LeverArms, TwoLevelSystem
from .spectroscopy import Segment, SegmentPlan, T1Map
from .tls import DefectLocation
from .traces import DefectTrace

PACKAGE_VERSION = "0.1.0"
GROUND_TRUTH_NAME = "ground_truth.csv"


class DatasetError(ValueError):
    """A dataset directory is missing files or malformed."""


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, obj) -> None:
    atomic_write_text(Path(path), json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: Path):
    with open(path) as fh:
        return json.load(fh)


def config_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# plan and manifest


def plan_to_dict(plan: SegmentPlan) -> dict:
    return {
        "freq_min_ghz": plan.freq_min_ghz,
        "freq_max_ghz": plan.freq_max_ghz,
        "freq_step_ghz": plan.freq_step_ghz,
        "segments": [
            {
                "channel": s.channel, "start_v": s.start_v, "stop_v": s.stop_v,
                "n_points": s.n_points, "fixed_v": s.fixed_v,
                "repetitions": s.repetitions,
            }
            for s in plan.segments
        ],
    }


def plan_from_dict(d: dict) -> SegmentPlan:
    try:
        segments = tuple(
            Segment(channel=s["channel"], start_v=s["start_v"], stop_v=s["stop_v"],
                    n_points=s["n_points"], fixed_v=s["fixed_v"],
                    repetitions=s.get("repetitions", 500))
            for s in d["segments"]
        )
        return SegmentPlan(segments, d["freq_min_ghz"], d["freq_max_ghz"], d["freq_step_ghz"])
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"bad plan record: {exc}") from exc


def build_manifest(plan: SegmentPlan, seed: int, qubit_id: str,
                   config_hash: str = "", extra: dict | None = None) -> dict:
    manifest = {
        "version": PACKAGE_VERSION,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "qubit_id": qubit_id,
        "config_sha256": config_hash,
        "plan": plan_to_dict(plan),
    }
    if extra:
        manifest.update(extra)
    return manifest


# ---------------------------------------------------------------------------
# segment maps


def _segment_path(outdir: Path, index: int) -> Path:
    return Path(outdir) / f"segment_{index:03d}.csv"


def write_t1_map(path: Path, t1map: T1Map) -> None:
    nb, nf = t1map.t1_us.shape
    bias_g = np.repeat(t1map.v_gate, nf)
    bias_p = np.repeat(t1map.v_piezo, nf)
    freqs = np.tile(t1map.freqs_ghz, nb)
    data = np.column_stack([bias_g, bias_p, freqs, t1map.t1_us.reshape(-1)])
    header = (
        f"channel={t1map.channel},segment={t1map.segment_index},"
        f"noise_sigma={t1map.noise_sigma!r}\n"
        "v_gate,v_piezo,freq_ghz,t1_us"
    )
    fd, tmp = tempfile.mkstemp(dir=Path(path).parent, suffix=".tmp")
    os.close(fd)
    np.savetxt(tmp, data, fmt="%.17g", delimiter=",", header=header, comments="# ")
    os.replace(tmp, path)


def read_t1_map(path: Path) -> T1Map:
    with open(path) as fh:
        meta_line = fh.readline().strip().lstrip("# ")
    meta = dict(kv.split("=", 1) for kv in meta_line.split(","))
    data = np.loadtxt(path, delimiter=",", skiprows=2)
    data = np.atleast_2d(data)
    freqs = np.unique(data[:, 2])
    nb = data.shape[0] // freqs.shape[0]
    if nb * freqs.shape[0] != data.shape[0]:
        raise DatasetError(f"ragged T1 map in {path}")
    t1 = data[:, 3].reshape(nb, freqs.shape[0])
    v_gate = data[::freqs.shape[0], 0]
    v_piezo = data[::freqs.shape[0], 1]
    return T1Map(
        segment_index=int(meta["segment"]), channel=meta["channel"],
        v_gate=v_gate, v_piezo=v_piezo, freqs_ghz=freqs, t1_us=t1,
        noise_sigma=float(eval(meta["noise_sigma"], {"__builtins__": {}})),
    )


# ---------------------------------------------------------------------------
# ground truth


def write_ground_truth(path: Path, ensemble: Ensemble) -> None:
    lines = [
        "# ground-truth defect list written for round-trip validation only;",
        "# the analysis pipeline never reads this file unless explicitly",
        "# asked to compare against it.",
        "location,delta_ghz,eps0_ghz,dipole_enm,orientation,deformation,"
        "kappa_gate_ghz_per_v,kappa_piezo_ghz_per_v,field_v_per_m,x_nm,y_nm",
    ]
    for rec in ensemble.records:
        t = rec.tls
        lines.append(
            f"{t.location.value},{t.delta!r},{t.eps0!r},{t.dipole!r},"
            f"{t.dipole_orientation!r},{t.deformation!r},{rec.arms.kappa_gate!r},"
            f"{rec.arms.kappa_piezo!r},{rec.field_rms_v_per_m!r},"
            f"{t.position[0]!r},{t.position[1]!r}"
        )
    lines.append(f"# window_ghz={ensemble.window_ghz!r} seed={ensemble.seed}")
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def read_ground_truth(path: Path) -> Ensemble:
    records = []
    window = (0.0, 1.0)
    seed = 0
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# window_ghz="):
                meta = line.lstrip("# ")
                parts = dict(p.split("=", 1) for p in meta.split(" "))
                window = tuple(json.loads(parts["window_ghz"].replace("(", "[").replace(")", "]")))
                seed = int(parts["seed"])
                continue
            if not line or line.startswith("#") or line.startswith("location,"):
                continue
            f = line.split(",")
            tls = TwoLevelSystem(
                delta=float(f[1]), eps0=float(f[2]), dipole=float(f[3]),
                dipole_orientation=float(f[4]), deformation=float(f[5]),
                location=DefectLocation(f[0]), position=(float(f[9]), float(f[10])),
            )
            records.append(DefectRecord(tls, LeverArms(float(f[6]), float(f[7])), float(f[8])))
    return Ensemble(records=tuple(records), window_ghz=window, seed=seed)


# ---------------------------------------------------------------------------
# dataset directories


def write_dataset(outdir: Path, manifest: dict, maps: list[T1Map],
                  ensemble: Ensemble | None = None) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(outdir / "manifest.json", manifest)
    for t1map in maps:
        write_t1_map(_segment_path(outdir, t1map.segment_index), t1map)
    if ensemble is not None:
        write_ground_truth(outdir / GROUND_TRUTH_NAME, ensemble)


def read_dataset(indir: Path):
    """Returns (manifest, plan, maps, ensemble-or-None)."""
    indir = Path(indir)
    manifest_path = indir / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"missing manifest.json in {indir}")
    manifest = read_json(manifest_path)
    plan = plan_from_dict(manifest["plan"])
    maps = []
    for i in range(len(plan.segments)):
        path = _segment_path(indir, i)
        if not path.exists():
            raise DatasetError(f"missing segment file {path.name}")
        maps.append(read_t1_map(path))
    gt_path = indir / GROUND_TRUTH_NAME
    ensemble = read_ground_truth(gt_path) if gt_path.exists() else None
    return manifest, plan, maps, ensemble


# ---------------------------------------------------------------------------
# analysis outputs


def write_trace_table(path: Path, traces: list[DefectTrace]) -> None:
    lines = ["trace_id,classification,delta_ghz,eps_i_ghz,kappa_gate_ghz_per_v,"
             "kappa_piezo_ghz_per_v,n_points,fit_residual_ghz,segments_seen"]
    for i, tr in enumerate(traces):
        p = tr.params
        segs = ";".join(str(s) for s in tr.segments_seen)
        lines.append(
            f"{i},{tr.classification.value},{p.delta:.6g},{p.eps_i:.6g},"
            f"{p.kappa_gate:.6g},{p.kappa_piezo:.6g},{tr.n_points},"
            f"{p.residual_rms:.6g},{segs}"
        )
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def write_segment_densities(path: Path, densities) -> None:
    lines = ["segment,channel,rho_jj_per_ghz,rho_surf_per_ghz,rho_nc_per_ghz,window_ghz"]
    for est in densities.segments:
        lines.append(
            f"{est.segment_index},{est.channel},{est.rho_jj:.6g},"
            f"{est.rho_surf:.6g},{est.rho_nc:.6g},{est.window_ghz:.6g}"
        )
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def write_fieldmap_csv(path: Path, fmap) -> None:
    ny, nx = fmap.potential.shape
    X, Y = np.meshgrid(fmap.x_nm, fmap.y_nm)
    data = np.column_stack([X.reshape(-1), Y.reshape(-1),
                            fmap.potential.reshape(-1), fmap.e_mag.reshape(-1)])
    fd, tmp = tempfile.mkstemp(dir=Path(path).parent, suffix=".tmp")
    os.close(fd)
    np.savetxt(tmp, data, fmt="%.9g", delimiter=",",
               header="x_nm,y_nm,potential_v,e_v_per_m", comments="")
    os.replace(tmp, path)


def write_profile_csv(path: Path, s_nm, e_v_per_m) -> None:
    fd, tmp = tempfile.mkstemp(dir=Path(path).parent, suffix=".tmp")
    os.close(fd)
    np.savetxt(tmp, np.column_stack([s_nm, e_v_per_m]), fmt="%.9g", delimiter=",",
               header="distance_nm,e_v_per_m", comments="")
    os.replace(tmp, path)
