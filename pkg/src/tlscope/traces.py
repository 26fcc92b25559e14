"""Inverse analysis: find T1 dips, link them into defect traces, classify.

Dips are detected per bias column as local maxima of the log relaxation
rate with prominence above a noise-scaled threshold, then refined to
sub-grid centers with a linearized Lorentzian least-squares fit (the
reciprocal of the excess rate is an exact parabola in frequency for a
Lorentzian). Linking walks the bias columns in execution order, predicting
each live trace's next frequency from its running tunneling-model fit.
A trace is junction-like when its fitted gate lever arm stays below the
flatness threshold (less than one frequency step of motion over the full
gate range) while still responding to strain; gate-responsive traces are
surface defects; traces observed under only one gate condition cannot be
classified.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from .spectroscopy import GATE, PIEZO, SegmentPlan, T1Map
from .tls import BiasPoint

# smallest dip depth ever reported, as a fraction of baseline T1; keeps the
# detector quiet on noise-free maps where the estimated noise level is zero
_MIN_LOG_PROMINENCE = 0.02


class TraceClass(Enum):
    JUNCTION = "junction"
    SURFACE = "surface"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class DipDetection:
    """One Lorentzian dip in a T1 map column."""

    segment_index: int
    bias_index: int
    global_column: int
    v_gate: float
    v_piezo: float
    freq_ghz: float
    depth_rate_per_us: float
    width_mhz: float
    residual: float
    baseline_rate_per_us: float

    def __post_init__(self):
        if not self.width_mhz > 0:
            raise ValueError("dip width must be positive")
        if not self.depth_rate_per_us > 0:
            raise ValueError("dip depth must be positive")


@dataclass(frozen=True)
class HyperbolaParams:
    """Tunneling-model trace parameters fitted to a set of dips."""

    delta: float
    eps_i: float
    kappa_gate: float
    kappa_piezo: float
    residual_rms: float

    def freq(self, v_gate, v_piezo):
        eps = self.eps_i + self.kappa_gate * v_gate + self.kappa_piezo * v_piezo
        return np.hypot(self.delta, eps)


@dataclass(frozen=True)
class DefectTrace:
    """A linked sequence of dips attributed to one defect."""

    detections: tuple[DipDetection, ...]
    params: HyperbolaParams
    classification: TraceClass
    segments_seen: tuple[int, ...]

    @property
    def n_points(self) -> int:
        return len(self.detections)


def _fit_lorentzian_window(freqs, rates, peak_idx, baseline, half_cols):
    """Sub-grid Lorentzian fit around one peak of the rate column.

    Fits 1/(rate - baseline) = a f^2 + b f + c by weighted linear least
    squares; falls back to a log-parabola vertex when the window is too
    small or the parabola is not dip-shaped. Returns (f0, width_mhz, depth,
    residual).
    """
    lo = max(peak_idx - half_cols, 0)
    hi = min(peak_idx + half_cols + 1, freqs.shape[0])
    f = freqs[lo:hi]
    y = rates[lo:hi] - baseline
    y_peak = rates[peak_idx] - baseline
    step = freqs[1] - freqs[0] if freqs.shape[0] > 1 else 1e-3
    good = y > max(0.05 * y_peak, 1e-12)
    if good.sum() >= 3:
        ff = f[good]
        z = 1.0 / y[good]
        w = y[good] ** 2
        design = np.column_stack([ff * ff, ff, np.ones_like(ff)])
        try:
            coef, *_ = np.linalg.lstsq(design * w[:, None], z * w, rcond=None)
            a, b, c = coef
            if a > 0:
                f0 = -b / (2 * a)
                w2 = c / a - f0 * f0
                if w2 > 0 and abs(f0 - freqs[peak_idx]) < 2 * step:
                    width = math.sqrt(w2)
                    depth = 1.0 / (a * w2)
                    model = baseline + depth * w2 / ((f - f0) ** 2 + w2)
                    resid = float(np.sqrt(np.mean((model - rates[lo:hi]) ** 2)))
                    return float(f0), width * 1e3, float(depth), resid
        except np.linalg.LinAlgError:
            pass
    # fallback: 3-point parabola through the log excess
    f0 = float(freqs[peak_idx])
    if 0 < peak_idx < freqs.shape[0] - 1:
        ym = np.log(rates[peak_idx - 1: peak_idx + 2])
        denom = ym[0] - 2 * ym[1] + ym[2]
        if denom < 0:
            shift = 0.5 * (ym[0] - ym[2]) / denom
            f0 += float(np.clip(shift, -1.0, 1.0)) * step
    return f0, step / 2 * 1e3, float(max(y_peak, 1e-12)), float("nan")


def detect_dips(t1map: T1Map, threshold_sigma: float = 2.5,
                fit_half_cols: int = 4, global_column_offset: int = 0) -> list[DipDetection]:
    """Find Lorentzian T1 dips in every bias column of one segment map.

    The per-column noise level is the scaled median absolute deviation of
    the log rate; reported dips have log-rate prominence of at least
    threshold_sigma times that level.
    """
    freqs = t1map.freqs_ghz
    out = []
    for bi in range(t1map.t1_us.shape[0]):
        rates = 1.0 / t1map.t1_us[bi]
        logr = np.log(rates)
        med = float(np.median(logr))
        sigma = 1.4826 * float(np.median(np.abs(logr - med)))
        prominence = max(threshold_sigma * sigma, _MIN_LOG_PROMINENCE)
        peaks, _ = find_peaks(logr - med, prominence=prominence)
        baseline = math.exp(med)
        for pk in peaks:
            f0, width_mhz, depth, resid = _fit_lorentzian_window(
                freqs, rates, int(pk), baseline, fit_half_cols)
            if not freqs[0] <= f0 <= freqs[-1]:
                continue
            out.append(DipDetection(
                segment_index=t1map.segment_index,
                bias_index=bi,
                global_column=global_column_offset + bi,
                v_gate=float(t1map.v_gate[bi]),
                v_piezo=float(t1map.v_piezo[bi]),
                freq_ghz=f0,
                depth_rate_per_us=depth,
                width_mhz=width_mhz,
                residual=resid,
                baseline_rate_per_us=baseline,
            ))
    return out


def detect_all(maps: list[T1Map], plan: SegmentPlan,
               threshold_sigma: float = 2.5) -> list[DipDetection]:
    """Dip detection over all segments with consistent global column indices."""
    out = []
    offset = 0
    for t1map, seg in zip(maps, plan.segments):
        out.extend(detect_dips(t1map, threshold_sigma, global_column_offset=offset))
        offset += seg.n_points
    return out


# ---------------------------------------------------------------------------
# trace model fitting


def fit_trace_model(v_gate, v_piezo, freqs) -> HyperbolaParams:
    """Least-squares tunneling-model fit f = sqrt(delta^2 + eps(V)^2).

    Seeded from the quadratic structure of f^2 against the piezo voltage
    (both branch signs are tried); the gate lever arm is released only when
    the points carry gate variation.
    """
    vg = np.asarray(v_gate, float)
    vp = np.asarray(v_piezo, float)
    f = np.asarray(freqs, float)
    n = f.shape[0]
    f_min = float(f.min())
    has_gate = np.ptp(vg) > 1e-12
    has_piezo = np.ptp(vp) > 1e-12

    def residual(theta):
        delta, eps_i, kg, kp = theta
        eps = eps_i + kg * vg + kp * vp
        return np.hypot(delta, eps) - f

    seeds = []
    if has_piezo and n >= 3:
        try:
            a, b, c = np.polyfit(vp, f * f, 2)
        except np.linalg.LinAlgError:
            a = b = c = 0.0
        kp0 = math.sqrt(max(a, 1e-12))
        for kp_s in (kp0, -kp0):
            eps0 = b / (2 * kp_s) if kp_s else 0.0
            d2 = max(c - eps0 * eps0, (0.05 * f_min) ** 2)
            seeds.append([min(math.sqrt(d2), f_min), eps0, 0.0, kp_s])
    mean_f = float(f.mean())
    seeds.append([0.9 * f_min, math.sqrt(max(mean_f**2 - (0.9 * f_min) ** 2, 1e-12)), 0.0, 0.0])
    seeds.append([0.9 * f_min, -math.sqrt(max(mean_f**2 - (0.9 * f_min) ** 2, 1e-12)), 0.0, 0.0])

    f_max = float(f.max())
    best = None
    for x0 in seeds:
        lower = [1e-6, -np.inf, -10.0 if has_gate else -1e-12, -10.0 if has_piezo else -1e-12]
        upper = [1.2 * f_max, np.inf, 10.0 if has_gate else 1e-12, 10.0 if has_piezo else 1e-12]
        x0 = np.clip(x0, lower, upper)
        try:
            sol = least_squares(residual, x0, bounds=(lower, upper), method="trf", max_nfev=200)
        except ValueError:
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    if best is None:
        return HyperbolaParams(f_min, 0.0, 0.0, 0.0, float("inf"))
    delta, eps_i, kg, kp = best.x
    rms = float(np.sqrt(2 * best.cost / max(n, 1)))
    return HyperbolaParams(float(delta), float(eps_i), float(kg), float(kp), rms)


# ---------------------------------------------------------------------------
# linking


class _LiveTrace:
    __slots__ = ("points", "params", "last_column", "refit_at")

    def __init__(self, det: DipDetection):
        self.points = [det]
        self.params: HyperbolaParams | None = None
        self.last_column = det.global_column
        self.refit_at = 3

    def predict(self, bp: BiasPoint) -> float:
        if self.params is not None:
            return float(self.params.freq(bp.v_gate, bp.v_piezo))
        if len(self.points) >= 2:
            p0, p1 = self.points[-2], self.points[-1]
            # linear continuation along whichever control moved
            dv_p = p1.v_piezo - p0.v_piezo
            dv_g = p1.v_gate - p0.v_gate
            if abs(dv_p) > 1e-12 and abs(bp.v_piezo - p1.v_piezo) > 1e-12:
                slope = (p1.freq_ghz - p0.freq_ghz) / dv_p
                return p1.freq_ghz + slope * (bp.v_piezo - p1.v_piezo)
            if abs(dv_g) > 1e-12 and abs(bp.v_gate - p1.v_gate) > 1e-12:
                slope = (p1.freq_ghz - p0.freq_ghz) / dv_g
                return p1.freq_ghz + slope * (bp.v_gate - p1.v_gate)
        return self.points[-1].freq_ghz

    def add(self, det: DipDetection):
        self.points.append(det)
        self.last_column = det.global_column
        if len(self.points) >= self.refit_at:
            self.refit()
            self.refit_at = max(self.refit_at + 2, int(1.5 * len(self.points)))

    def refit(self):
        vg = [p.v_gate for p in self.points]
        vp = [p.v_piezo for p in self.points]
        f = [p.freq_ghz for p in self.points]
        self.params = fit_trace_model(vg, vp, f)

    @property
    def residual_rms(self) -> float:
        if self.params is None or not math.isfinite(self.params.residual_rms):
            return float("inf")
        return self.params.residual_rms


def link_traces(detections: list[DipDetection], plan: SegmentPlan,
                max_jump_ghz: float = 0.03, max_dormant_columns: int = 30,
                min_points: int = 3,
                flatness_threshold: float | None = None) -> list[DefectTrace]:
    """Link detections across bias columns into per-defect traces.

    Each detection joins at most one trace. Candidate (trace, detection)
    pairs within the gating distance are ranked by prediction error; when
    two traces compete for the same detection within one frequency step
    (a crossing), the trace with the smaller running fit residual wins,
    ties going to the longer trace. Unmatched detections seed new traces.
    Traces sleeping longer than ``max_dormant_columns`` are retired, and
    only traces with at least ``min_points`` dips are kept.
    """
    by_column: dict[int, list[DipDetection]] = {}
    for det in detections:
        by_column.setdefault(det.global_column, []).append(det)

    columns = plan.columns()
    step = plan.freq_step_ghz
    live: list[_LiveTrace] = []
    finished: list[_LiveTrace] = []

    for ci, (_si, _bi, bp) in enumerate(columns):
        dets = by_column.get(ci, [])
        still = []
        for tr in live:
            if ci - tr.last_column > max_dormant_columns:
                finished.append(tr)
            else:
                still.append(tr)
        live = still
        if dets:
            preds = [tr.predict(bp) for tr in live]
            pairs = []
            for ti, pred in enumerate(preds):
                for di, det in enumerate(dets):
                    err = abs(det.freq_ghz - pred)
                    if err <= max_jump_ghz:
                        pairs.append((err, ti, di))
            pairs.sort(key=lambda p: p[0])
            used_traces: set[int] = set()
            used_dets: set[int] = set()
            for k, (err, ti, di) in enumerate(pairs):
                if ti in used_traces or di in used_dets:
                    continue
                # crossing ambiguity: another free trace explains this dip
                # almost equally well -> decide by fit residual, then length
                for err2, tj, dj in pairs[k + 1:]:
                    if dj != di or tj in used_traces or err2 - err > step:
                        continue
                    a, b = live[ti], live[tj]
                    if (b.residual_rms, -len(b.points)) < (a.residual_rms, -len(a.points)):
                        ti = tj
                    break
                live[ti].add(dets[di])
                used_traces.add(ti)
                used_dets.add(di)
            for di, det in enumerate(dets):
                if di not in used_dets:
                    live.append(_LiveTrace(det))
    finished.extend(live)

    thr = flatness_threshold
    if thr is None:
        span = plan.gate_span_v()
        thr = plan.freq_step_ghz / span if span > 0 else float("inf")

    traces = []
    for tr in finished:
        if len(tr.points) < min_points:
            continue
        tr.refit()
        dets = tuple(sorted(tr.points, key=lambda d: d.global_column))
        cls = _classify(dets, tr.params, thr)
        traces.append(DefectTrace(
            detections=dets,
            params=tr.params,
            classification=cls,
            segments_seen=tuple(sorted({d.segment_index for d in dets})),
        ))
    traces.sort(key=lambda t: t.detections[0].global_column)
    return traces


def _classify(dets, params: HyperbolaParams, flatness_threshold: float) -> TraceClass:
    vg = np.array([d.v_gate for d in dets])
    vp = np.array([d.v_piezo for d in dets])
    gate_informed = np.ptp(vg) > 1e-9
    piezo_informed = np.ptp(vp) > 1e-9
    if gate_informed and abs(params.kappa_gate) >= flatness_threshold:
        return TraceClass.SURFACE
    if gate_informed and piezo_informed:
        return TraceClass.JUNCTION
    return TraceClass.UNCLASSIFIED


def classify_trace(trace: DefectTrace, plan: SegmentPlan,
                   flatness_threshold: float | None = None) -> TraceClass:
    """Classify one trace; see module docstring for the rule."""
    if not trace.detections:
        raise ValueError("empty trace")
    thr = flatness_threshold
    if thr is None:
        span = plan.gate_span_v()
        thr = plan.freq_step_ghz / span if span > 0 else float("inf")
    return _classify(trace.detections, trace.params, thr)


# ---------------------------------------------------------------------------
# coverage and ground-truth comparison


def trace_coverage(trace: DefectTrace, plan: SegmentPlan) -> np.ndarray:
    """Boolean per-global-column mask: model frequency in-window between the
    trace's first and last detection (bridges gaps where the detector missed
    single dips)."""
    columns = plan.columns()
    n = len(columns)
    mask = np.zeros(n, dtype=bool)
    first = trace.detections[0].global_column
    last = trace.detections[-1].global_column
    lo, hi = plan.window_ghz
    for ci in range(first, last + 1):
        _si, _bi, bp = columns[ci]
        f = trace.params.freq(bp.v_gate, bp.v_piezo)
        if lo <= f <= hi:
            mask[ci] = True
    for det in trace.detections:
        mask[det.global_column] = True
    return mask


def match_to_ensemble(traces, ensemble, plan: SegmentPlan,
                      tol_ghz: float = 0.006):
    """Match traces to ground-truth defects by frequency agreement.

    Returns (assignment, summary): assignment maps trace index -> defect
    index (or None), and summary holds per-class precision/recall of the
    junction/surface classification against the true locations.
    """
    from .tls import JUNCTION_LOCATIONS, asymmetry, transition_energy

    columns = plan.columns()
    recs = list(ensemble.records)
    assignment: dict[int, int | None] = {}
    for ti, trace in enumerate(traces):
        best = (tol_ghz, None)
        for di, rec in enumerate(recs):
            errs = []
            for det in trace.detections:
                bp = columns[det.global_column][2]
                f_true = transition_energy(rec.tls.delta, asymmetry(rec.tls, rec.arms, bp))
                errs.append(abs(f_true - det.freq_ghz))
            err = float(np.mean(errs))
            if err < best[0]:
                best = (err, di)
        assignment[ti] = best[1]

    def true_class(di):
        loc = recs[di].tls.location
        return TraceClass.JUNCTION if loc in JUNCTION_LOCATIONS else TraceClass.SURFACE

    summary = {}
    for cls in (TraceClass.JUNCTION, TraceClass.SURFACE):
        predicted = [ti for ti, t in enumerate(traces) if t.classification is cls]
        correct = [ti for ti in predicted
                   if assignment[ti] is not None and true_class(assignment[ti]) is cls]
        matched_defects = {assignment[ti] for ti in correct}
        relevant = {di for di in range(len(recs)) if true_class(di) is cls
                    and any(assignment[ti] == di for ti in assignment)}
        all_of_class = {di for di in range(len(recs)) if true_class(di) is cls}
        precision = len(correct) / len(predicted) if predicted else 1.0
        detected_of_class = {di for di in all_of_class
                             if any(assignment[ti] == di for ti in assignment)}
        recall = (len(matched_defects & all_of_class) / len(all_of_class)
                  if all_of_class else 1.0)
        summary[cls.value] = {
            "precision": precision,
            "recall": recall,
            "n_predicted": len(predicted),
            "n_true": len(all_of_class),
            "n_detected": len(detected_of_class),
        }
    return assignment, summary
