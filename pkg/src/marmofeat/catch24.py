"""catch22 time-series features plus mean and spread (24 values).

The 22 canonical features follow the reference C implementation of
catch22, including its quirks (off-by-one lag conventions, the
3.14159265359 constant in the Welch features, sample standard deviations).
Each one is computed on the z-scored series; mean and standard deviation
come from the raw series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import Waveform
from .errors import DataError, SeriesTooShortError

MIN_SERIES_LENGTH = 32

CATCH22_NAMES = (
    "DN_HistogramMode_5",
    "DN_HistogramMode_10",
    "CO_f1ecac",
    "CO_FirstMin_ac",
    "CO_HistogramAMI_even_2_5",
    "CO_trev_1_num",
    "MD_hrv_classic_pnn40",
    "SB_BinaryStats_mean_longstretch1",
    "SB_TransitionMatrix_3ac_sumdiagcov",
    "PD_PeriodicityWang_th0_01",
    "CO_Embed2_Dist_tau_d_expfit_meandiff",
    "IN_AutoMutualInfoStats_40_gaussian_fmmi",
    "FC_LocalSimple_mean1_tauresrat",
    "DN_OutlierInclude_p_001_mdrmd",
    "DN_OutlierInclude_n_001_mdrmd",
    "SP_Summaries_welch_rect_area_5_1",
    "SB_BinaryStats_diff_longstretch0",
    "SB_MotifThree_quantile_hh",
    "SC_FluctAnal_2_rsrangefit_50_1_logi_prop_r1",
    "SC_FluctAnal_2_dfa_50_1_2_logi_prop_r1",
    "SP_Summaries_welch_rect_centroid",
    "FC_LocalSimple_mean3_stderr",
)
CATCH24_NAMES = CATCH22_NAMES + ("DN_Mean", "DN_Spread_Std")

# The reference implementation hard-codes this approximation of pi.
_PI = 3.14159265359
_PERFECT_CORR_TOL = 1e-12


@dataclass(frozen=True)
class SeriesStats:
    mean: float
    std: float
    n: int


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    feature_names: tuple[str, ...]
    nan_mask: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def series_stats(x) -> SeriesStats:
    x = np.asarray(x, dtype=np.float64)
    return SeriesStats(float(np.mean(x)), float(np.std(x)), x.size)


def zscore_series(x, ddof: int = 0) -> tuple[np.ndarray, bool]:
    """Return (z-scored copy, degenerate flag).

    A constant series has no defined z-score; it maps to zeros with the flag
    set.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise DataError(f"need a 1-D series of length >= 2, got shape {x.shape}")
    mu = x.mean()
    centred = x - mu
    if np.all(x == x[0]):
        return np.zeros_like(x), True
    sd = np.sqrt(np.sum(centred * centred) / (x.size - ddof))
    return centred / sd, False


# --- shared helpers -----------------------------------------------------

def _nextpow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def _autocorr_fft(y: np.ndarray) -> np.ndarray:
    """Biased autocorrelation normalised to ac[0] = 1, lags 0..n-1."""
    n = y.size
    nfft = _nextpow2(n) << 1
    f = np.fft.rfft(y - y.mean(), nfft)
    ac = np.fft.irfft(f * np.conj(f), nfft)
    return ac[:n] / ac[0]


def _first_zero(ac: np.ndarray, maxtau: int) -> int:
    below = np.flatnonzero(ac[:maxtau] <= 0)
    return int(below[0]) if below.size else int(maxtau)


def _numerically_constant(x: np.ndarray) -> bool:
    """True when x is constant up to rounding (e.g. residuals of a pure ramp)."""
    return bool(np.ptp(x) <= 1e-9 * np.max(np.abs(x)))


def _linreg(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    n = x.size
    sx, sy = x.sum(), y.sum()
    sxx, sxy = np.dot(x, x), np.dot(x, y)
    denom = n * sxx - sx * sx
    if denom == 0:
        return 0.0, 0.0
    return (n * sxy - sx * sy) / denom, (sy * sxx - sx * sxy) / denom


def _ref_quantile(sorted_y: np.ndarray, q: float) -> float:
    n = sorted_y.size
    lim = 0.5 / n
    if q < lim:
        return float(sorted_y[0])
    if q > 1 - lim:
        return float(sorted_y[-1])
    idx = n * q - 0.5
    lo, hi = int(np.floor(idx)), int(np.ceil(idx))
    if lo == hi:
        return float(sorted_y[lo])
    return float(sorted_y[lo] + (idx - lo) * (sorted_y[hi] - sorted_y[lo]) / (hi - lo))


def _coarsegrain_quantile(y: np.ndarray, groups: int) -> np.ndarray:
    """Labels 1..groups by quantile thresholds (0 if unassigned)."""
    s = np.sort(y)
    levels = np.zeros(groups + 1)
    acc = 0.0
    step = 1.0 / groups
    for i in range(groups + 1):
        levels[i] = acc
        acc += step
    th = np.array([_ref_quantile(s, q) for q in levels])
    th[0] -= 1
    labels = np.zeros(y.size, dtype=np.int64)
    for i in range(groups):
        labels[(y > th[i]) & (y <= th[i + 1])] = i + 1
    return labels


# --- the 22 features ----------------------------------------------------

def _histogram_mode(y: np.ndarray, n_bins: int) -> float:
    lo, hi = y.min(), y.max()
    step = (hi - lo) / n_bins
    idx = np.clip(((y - lo) / step).astype(np.int64), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    edges = np.arange(n_bins + 1) * step + lo
    centres = (edges[:-1] + edges[1:]) * 0.5
    best = counts == counts.max()
    return float(np.sum(centres[best]) / np.count_nonzero(best))


def _f1ecac(ac: np.ndarray) -> float:
    n = ac.size
    thresh = 1.0 / np.exp(1)
    below = np.flatnonzero(ac[1:n - 1] < thresh)
    if below.size == 0:
        return float(n)
    i = int(below[0])
    m = ac[i + 1] - ac[i]
    return float(i + (thresh - ac[i]) / m)


def _first_min_ac(ac: np.ndarray) -> float:
    n = ac.size
    mid = ac[1:n - 1]
    hits = np.flatnonzero((mid < ac[:n - 2]) & (mid < ac[2:n]))
    return float(hits[0] + 1) if hits.size else float(n)


def _histogram_ami_even(y: np.ndarray, tau: int = 2, n_bins: int = 5) -> float:
    lo, hi = y.min(), y.max()
    step = (hi - lo + 0.2) / n_bins
    edges = lo + step * np.arange(n_bins + 1) - 0.1
    # bin b (1-based) holds edges[b-1] <= v < edges[b]
    bins = np.searchsorted(edges, y, side="right")
    b1, b2 = bins[:-tau] - 1, bins[tau:] - 1
    valid = (b1 >= 0) & (b1 < n_bins) & (b2 >= 0) & (b2 < n_bins)
    joint = np.zeros((n_bins, n_bins))
    np.add.at(joint, (b1[valid], b2[valid]), 1.0)
    joint /= joint.sum()
    pi = joint.sum(axis=1)
    pj = joint.sum(axis=0)
    nz = joint > 0
    outer = np.outer(pi, pj)
    return float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))


def _trev(y: np.ndarray) -> float:
    return float(np.mean(np.diff(y) ** 3))


def _pnn40(y: np.ndarray) -> float:
    d = np.diff(y)
    return float(np.count_nonzero(np.abs(d) * 1000 > 40) / d.size)


def _longest_stretch(binary: np.ndarray, stop_value: int) -> float:
    """Quirky run-length measure from the reference binary-stats features."""
    m = binary.size
    stops = np.flatnonzero(binary == stop_value)
    if stops.size == 0 or stops[-1] != m - 1:
        stops = np.append(stops, m - 1)
    gaps = np.diff(np.concatenate(([0], stops)))
    return float(max(0, gaps.max()))


def _binary_mean_longstretch1(y: np.ndarray) -> float:
    b = (y[:-1] - y.mean() > 0).astype(np.int64)
    return _longest_stretch(b, 0)


def _binary_diff_longstretch0(y: np.ndarray) -> float:
    b = (np.diff(y) >= 0).astype(np.int64)
    return _longest_stretch(b, 1)


def _transition_matrix_sumdiagcov(y: np.ndarray, ac: np.ndarray) -> float:
    n = y.size
    tau = _first_zero(ac, n)
    if tau == 0:
        tau = 1
    down = y[::tau]
    labels = _coarsegrain_quantile(down, 3)
    t = np.zeros((3, 3))
    np.add.at(t, (labels[:-1] - 1, labels[1:] - 1), 1.0)
    t /= down.size - 1
    cov = np.cov(t, rowvar=False, ddof=1)
    return float(np.trace(cov))


def _spline_detrend(y: np.ndarray) -> np.ndarray:
    """Residual of a least-squares cubic spline with knots at 0, n/2-1, n-1."""
    n = y.size
    knot = n // 2 - 1
    x = np.arange(n, dtype=np.float64)
    scale = max(n - 1, 1)
    u, k = x / scale, knot / scale
    basis = np.column_stack([np.ones(n), u, u ** 2, u ** 3, np.clip(u - k, 0, None) ** 3])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return y - basis @ coef


def _autocov_lags(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Sample covariance of x[:-k] with x[k:] for k = 1..max_lag."""
    n = x.size
    nfft = _nextpow2(n) << 1
    f = np.fft.rfft(x, nfft)
    raw = np.fft.irfft(f * np.conj(f), nfft)[1:max_lag + 1]
    k = np.arange(1, max_lag + 1)
    m = n - k
    csum = np.concatenate(([0.0], np.cumsum(x)))
    head = csum[m]              # sum x[0:m]
    tail = csum[n] - csum[k]    # sum x[k:n]
    return (raw - head * tail / m) / (m - 1)


def _periodicity_wang(y: np.ndarray) -> float:
    n = y.size
    sub = _spline_detrend(y)
    acmax = int(np.ceil(n / 3))
    acf = _autocov_lags(sub, acmax)
    slope_in = acf[1:acmax - 1] - acf[0:acmax - 2]
    slope_out = acf[2:acmax] - acf[1:acmax - 1]
    troughs = np.flatnonzero((slope_in < 0) & (slope_out > 0)) + 1
    peaks = np.flatnonzero((slope_in > 0) & (slope_out < 0)) + 1
    for p in peaks:
        before = troughs[troughs < p]
        if before.size == 0:
            continue
        trough = acf[before[-1]]
        if acf[p] - trough < 0.01 or acf[p] < 0:
            continue
        return float(p)
    return 0.0


def _embed2_dist_expfit_meandiff(y: np.ndarray, ac: np.ndarray) -> float:
    n = y.size
    tau = _first_zero(ac, n)
    if tau > n / 10:
        tau = int(np.floor(n / 10))
    m = n - tau - 1
    d1 = y[1:m + 1] - y[:m]
    d2 = y[tau:tau + m] - y[tau + 1:tau + m + 1]
    d = np.sqrt(d1 * d1 + d2 * d2)
    if np.any(np.isnan(d)):
        return float("nan")
    lam = d.mean()
    sd = d.std(ddof=1)
    if sd < 0.001:
        return 0.0
    n_bins = int(np.ceil((d.max() - d.min()) / (3.5 * sd / m ** (1 / 3.0))))
    if n_bins == 0:
        return 0.0
    lo = d.min()
    step = (d.max() - lo) / n_bins
    idx = np.clip(((d - lo) / step).astype(np.int64), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins) / m
    edges = np.arange(n_bins + 1) * step + lo
    expf = np.exp(-(edges[:-1] + edges[1:]) * 0.5 / lam) / lam
    expf[expf < 0] = 0
    return float(np.mean(np.abs(counts - expf)))


def _automutual_gaussian_fmmi(y: np.ndarray) -> float:
    n = y.size
    tau = min(40, int(np.ceil(n / 2)))
    ami = np.empty(tau)
    for i in range(tau):
        a, b = y[:n - i - 1], y[i + 1:]
        a = a - a.mean()
        b = b - b.mean()
        r = np.dot(a, b) / np.sqrt(np.dot(a, a) * np.dot(b, b))
        # Perfect (anti)correlation up to rounding: infinite information.
        ami[i] = np.inf if 1 - r * r <= _PERFECT_CORR_TOL else -0.5 * np.log(1 - r * r)
    mid = ami[1:tau - 1]
    hits = np.flatnonzero((mid < ami[:tau - 2]) & (mid < ami[2:tau]))
    return float(hits[0] + 1) if hits.size else float(tau)


def _local_mean_residuals(y: np.ndarray, train: int) -> np.ndarray:
    c = np.concatenate(([0.0], np.cumsum(y)))
    n = y.size
    est = (c[train:n] - c[:n - train]) / train
    return y[train:] - est


def _local_mean1_tauresrat(y: np.ndarray, ac: np.ndarray) -> float:
    res = _local_mean_residuals(y, 1)
    if _numerically_constant(res):
        return float("nan")
    res_zero = _first_zero(_autocorr_fft(res), res.size)
    return float(res_zero / _first_zero(ac, y.size))


def _local_mean3_stderr(y: np.ndarray) -> float:
    return float(np.std(_local_mean_residuals(y, 3), ddof=1))


def _outlier_include(y: np.ndarray, sign: int) -> float:
    inc = 0.01
    n = y.size
    work = sign * y
    if np.all(y == y[0]):
        return 0.0
    tot = np.count_nonzero(work >= 0)
    max_val = work.max()
    if max_val < inc:
        return 0.0
    n_thresh = int(max_val / inc + 1)
    mean_gap = np.full(n_thresh, np.nan)
    prop = np.empty(n_thresh)
    med_pos = np.empty(n_thresh)
    for j in range(n_thresh):
        idx = np.flatnonzero(work >= j * inc) + 1.0
        h = idx.size
        if h > 1:
            mean_gap[j] = (idx[-1] - idx[0]) / (h - 1)
        elif h == 0:
            mean_gap[j] = -0.0
        prop[j] = (h - 1) * 100.0 / tot
        med_pos[j] = (np.median(idx) if h else np.nan) / (n / 2.0) - 1
    above = np.flatnonzero(prop > 2)
    mj = int(above[-1]) if above.size else 0
    nan_idx = np.flatnonzero(np.isnan(mean_gap))
    fbi = int(nan_idx[0]) if nan_idx.size else n_thresh - 1
    limit = min(mj, fbi)
    return float(np.median(med_pos[:limit + 1]))


def _welch_rect(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = y.size
    nfft = _nextpow2(n)
    f = np.fft.fft(y - y.mean(), nfft)
    p = np.abs(f) ** 2
    n_out = nfft // 2 + 1
    pxx = p[:n_out] / n
    pxx[1:n_out - 1] *= 2
    freqs = np.arange(n_out) * (1.0 / nfft)
    return 2 * _PI * freqs, pxx / (2 * _PI)


def _welch_area_5_1(y: np.ndarray) -> float:
    w, s = _welch_rect(y)
    if np.any(np.isinf(s)):
        return 0.0
    dw = w[1] - w[0]
    return float(np.sum(s[:s.size // 5]) * dw)


def _welch_centroid(y: np.ndarray) -> float:
    w, s = _welch_rect(y)
    if np.any(np.isinf(s)):
        return 0.0
    cs = np.cumsum(s)
    hits = np.flatnonzero(cs > cs[-1] * 0.5)
    return float(w[hits[0]]) if hits.size else 0.0


def _motif_three_hh(y: np.ndarray) -> float:
    labels = _coarsegrain_quantile(y, 3)
    pairs = np.zeros((3, 3))
    a, b = labels[:-1], labels[1:]
    ok = (a > 0) & (b > 0)
    np.add.at(pairs, (a[ok] - 1, b[ok] - 1), 1.0)
    p = pairs / (y.size - 1.0)
    nz = p > 0
    return float(-np.sum(p[nz] * np.log(p[nz])))


def _fluct_taus(n: int) -> np.ndarray:
    lo, hi = np.log(5), np.log(n // 2)
    steps = lo + np.arange(50) * ((hi - lo) / 49)
    # C round(): half away from zero
    taus = np.floor(np.exp(steps) + 0.5).astype(np.int64)
    return np.unique(taus)


def _fluct_anal(y: np.ndarray, lag: int, how: str) -> float:
    taus = _fluct_taus(y.size)
    if taus.size < 12:
        return 0.0
    size_cs = y.size // lag
    ycs = np.cumsum(y[::lag][:size_cs])
    fluct = np.empty(taus.size)
    for i, tau in enumerate(taus):
        n_buf = size_cs // tau
        seg = ycs[:n_buf * tau].reshape(n_buf, tau)
        x = np.arange(1, tau + 1, dtype=np.float64)
        sx, sxx = x.sum(), np.dot(x, x)
        sy = seg.sum(axis=1)
        sxy = seg @ x
        denom = tau * sxx - sx * sx
        slope = (tau * sxy - sx * sy) / denom
        icpt = (sy * sxx - sx * sxy) / denom
        resid = seg - (slope[:, None] * x[None, :] + icpt[:, None])
        if how == "rsrangefit":
            fluct[i] = np.sqrt(np.sum((resid.max(axis=1) - resid.min(axis=1)) ** 2) / n_buf)
        else:
            fluct[i] = np.sqrt(np.sum(resid * resid) / (n_buf * tau))
    with np.errstate(divide="ignore"):
        log_t, log_f = np.log(taus.astype(np.float64)), np.log(fluct)
    ntt = taus.size
    min_pts = 6
    sserr = np.empty(ntt - 2 * min_pts + 1)
    for i in range(min_pts, ntt - min_pts + 1):
        m1, b1 = _linreg(log_t[:i], log_f[:i])
        m2, b2 = _linreg(log_t[i - 1:], log_f[i - 1:])
        sserr[i - min_pts] = (np.linalg.norm(log_t[:i] * m1 + b1 - log_f[:i])
                              + np.linalg.norm(log_t[i - 1:] * m2 + b2 - log_f[i - 1:]))
    first = np.flatnonzero(sserr == np.min(sserr))
    first_min = float(first[0] + min_pts - 1) if first.size else 0.0
    return (first_min + 1) / ntt


def catch22_values(z: np.ndarray) -> np.ndarray:
    """The 22 canonical features of an already z-scored series, raw (may hold NaN)."""
    ac = _autocorr_fft(z)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = [
            _histogram_mode(z, 5),
            _histogram_mode(z, 10),
            _f1ecac(ac),
            _first_min_ac(ac),
            _histogram_ami_even(z),
            _trev(z),
            _pnn40(z),
            _binary_mean_longstretch1(z),
            _transition_matrix_sumdiagcov(z, ac),
            _periodicity_wang(z),
            _embed2_dist_expfit_meandiff(z, ac),
            _automutual_gaussian_fmmi(z),
            _local_mean1_tauresrat(z, ac),
            _outlier_include(z, 1),
            _outlier_include(z, -1),
            _welch_area_5_1(z),
            _binary_diff_longstretch0(z),
            _motif_three_hh(z),
            _fluct_anal(z, 1, "rsrangefit"),
            _fluct_anal(z, 2, "dfa"),
            _welch_centroid(z),
            _local_mean3_stderr(z),
        ]
    return np.array(out, dtype=np.float64)


def compute_catch24_series(x) -> FeatureVector:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError(f"series must be 1-D, got shape {x.shape}")
    if x.size < MIN_SERIES_LENGTH:
        raise SeriesTooShortError(
            f"series of {x.size} samples is shorter than the minimum {MIN_SERIES_LENGTH}")
    if not np.all(np.isfinite(x)):
        raise DataError("series contains non-finite samples")

    # Canonical preprocessing uses the sample (n-1) standard deviation.
    z, degenerate = zscore_series(x, ddof=1)
    if degenerate:
        c22 = np.full(22, np.nan)
    else:
        c22 = catch22_values(z)
    stats = series_stats(x)
    values = np.concatenate([c22, [stats.mean, stats.std]])
    mask = ~np.isfinite(values)
    values[mask] = 0.0
    return FeatureVector(values, CATCH24_NAMES, mask)


def compute_catch24(w: Waveform) -> FeatureVector:
    return compute_catch24_series(w.samples)
