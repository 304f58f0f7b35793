"""Readmission-rate estimation from discharge records.

A logistic regression of the 30-day readmission indicator on caller-chosen
covariates plus facility, patient-type, and facility-by-type indicator terms.
The interaction terms let every (facility, type) cell carry its own adjusted
rate, which is what the downstream transfer model consumes.  Confidence
intervals come from a nonparametric bootstrap over records.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

__all__ = [
    "DischargeRecord",
    "EstimationError",
    "LogisticFit",
    "RateTable",
    "read_discharge_csv",
    "fit_logistic",
    "log_likelihood",
    "log_likelihood_gradient",
    "predict_rates",
    "bootstrap_ci",
]

GRADIENT_TOL = 1e-8
MAX_NEWTON_ITERATIONS = 100
MAX_ABS_COEF = 40.0        # logit scale; beyond this the fit has separated


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DischargeRecord:
    readmitted: int
    snf: str
    patient_type: str
    covariates: Mapping[str, float]

    def __post_init__(self):
        if self.readmitted not in (0, 1):
            raise EstimationError(f"readmitted must be 0 or 1, got {self.readmitted!r}")


def read_discharge_csv(path) -> list[DischargeRecord]:
    """Load records from a CSV with header
    ``readmitted,snf,patient_type,<covariate columns...>``.
    Rows with missing values are rejected with their line numbers."""
    records = []
    bad_lines = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"readmitted", "snf", "patient_type"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise EstimationError(
                f"header must contain {sorted(required)}; got {reader.fieldnames}")
        cov_names = [c for c in reader.fieldnames if c not in required]
        for lineno, row in enumerate(reader, start=2):
            if any(v is None or v == "" for v in row.values()):
                bad_lines.append(lineno)
                continue
            records.append(DischargeRecord(
                readmitted=int(row["readmitted"]),
                snf=row["snf"],
                patient_type=row["patient_type"],
                covariates={c: float(row[c]) for c in cov_names}))
    if bad_lines:
        raise EstimationError(f"missing values on lines {bad_lines[:10]}"
                              + ("..." if len(bad_lines) > 10 else ""))
    return records


# ----------------------------------------------------------------------
# design matrix
# ----------------------------------------------------------------------

def _levels(records: Sequence[DischargeRecord]) -> tuple[list[str], list[str]]:
    snfs = sorted({r.snf for r in records})
    types = sorted({r.patient_type for r in records})
    return snfs, types


def _design(records: Sequence[DischargeRecord], covariates: Sequence[str],
            snfs: Sequence[str], types: Sequence[str]) -> tuple[np.ndarray, np.ndarray, list[str]]:
    n = len(records)
    cols = ["intercept"] + list(covariates)
    cols += [f"snf[{s}]" for s in snfs[1:]]
    cols += [f"type[{t}]" for t in types[1:]]
    cols += [f"snf[{s}]:type[{t}]" for s in snfs[1:] for t in types[1:]]
    X = np.zeros((n, len(cols)))
    y = np.empty(n)
    s_idx = {s: i for i, s in enumerate(snfs)}
    t_idx = {t: i for i, t in enumerate(types)}
    nc = len(covariates)
    for r_i, rec in enumerate(records):
        y[r_i] = rec.readmitted
        X[r_i, 0] = 1.0
        for c_i, c in enumerate(covariates):
            try:
                X[r_i, 1 + c_i] = rec.covariates[c]
            except KeyError:
                raise EstimationError(f"record {r_i}: missing covariate {c!r}") from None
        si, ti = s_idx[rec.snf], t_idx[rec.patient_type]
        base = 1 + nc
        if si > 0:
            X[r_i, base + si - 1] = 1.0
        if ti > 0:
            X[r_i, base + len(snfs) - 1 + ti - 1] = 1.0
        if si > 0 and ti > 0:
            inter = base + len(snfs) - 1 + len(types) - 1
            X[r_i, inter + (si - 1) * (len(types) - 1) + (ti - 1)] = 1.0
    return X, y, cols


def _cell_row(covariate_values: Sequence[float], snf: str, patient_type: str,
              covariates: Sequence[str], snfs: Sequence[str],
              types: Sequence[str]) -> np.ndarray:
    row = np.zeros(1 + len(covariates) + (len(snfs) - 1) + (len(types) - 1)
                   + (len(snfs) - 1) * (len(types) - 1))
    row[0] = 1.0
    row[1:1 + len(covariates)] = covariate_values
    si, ti = snfs.index(snf), types.index(patient_type)
    base = 1 + len(covariates)
    if si > 0:
        row[base + si - 1] = 1.0
    if ti > 0:
        row[base + len(snfs) - 1 + ti - 1] = 1.0
    if si > 0 and ti > 0:
        inter = base + len(snfs) - 1 + len(types) - 1
        row[inter + (si - 1) * (len(types) - 1) + (ti - 1)] = 1.0
    return row


# ----------------------------------------------------------------------
# likelihood
# ----------------------------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_likelihood(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    z = X @ beta
    # stable log(1 + e^z)
    log1pexp = np.where(z > 30, z, np.log1p(np.exp(np.minimum(z, 30))))
    return float(y @ z - log1pexp.sum())


def log_likelihood_gradient(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return X.T @ (y - _sigmoid(X @ beta))


@dataclass(frozen=True)
class LogisticFit:
    coef: np.ndarray
    columns: tuple[str, ...]
    cov: np.ndarray                 # inverse observed information at the optimum
    log_lik: float
    iterations: int
    gradient_norm: float
    snfs: tuple[str, ...]
    types: tuple[str, ...]
    covariates: tuple[str, ...]
    default_profile: tuple[float, ...]   # covariate means/modes of the data

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    def cell_probability(self, snf: str, patient_type: str,
                         profile: Sequence[float]) -> float:
        row = _cell_row(profile, snf, patient_type,
                        self.covariates, self.snfs, self.types)
        return float(_sigmoid(np.atleast_1d(row @ self.coef))[0])


def fit_logistic(records: Sequence[DischargeRecord],
                 covariates: Sequence[str]) -> LogisticFit:
    """Maximum-likelihood fit by Newton's method with step halving.

    Raises on empty (facility, type) cells, rank-deficient designs (naming
    the dependent columns), separation, and non-convergence.
    """
    if not records:
        raise EstimationError("no records")
    snfs, types = _levels(records)
    cells = {(r.snf, r.patient_type) for r in records}
    empty = [(s, t) for s in snfs for t in types if (s, t) not in cells]
    if empty:
        raise EstimationError(f"no records for cells {empty[:6]}")

    X, y, cols = _design(records, covariates, snfs, types)
    # rank screen via pivoted QR: surplus pivots name the dependent columns
    _, R, piv = _pivoted_qr(X)
    diag = np.abs(np.diag(R))
    rank = int((diag > diag.max() * max(X.shape) * np.finfo(float).eps).sum())
    if rank < X.shape[1]:
        bad = [cols[i] for i in piv[rank:]]
        raise EstimationError(f"design matrix is rank deficient; dependent columns: {bad}")

    beta = np.zeros(X.shape[1])
    ll = log_likelihood(X, y, beta)
    grad = log_likelihood_gradient(X, y, beta)
    it = 0
    for it in range(1, MAX_NEWTON_ITERATIONS + 1):
        if np.abs(grad).max() <= GRADIENT_TOL:
            break
        p = _sigmoid(X @ beta)
        w = p * (1.0 - p)
        H = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            raise EstimationError(
                "information matrix is singular (quasi-complete separation)") from None
        scale = 1.0
        for _ in range(40):
            cand = beta + scale * step
            ll_cand = log_likelihood(X, y, cand)
            if ll_cand >= ll - 1e-12:
                break
            scale *= 0.5
        else:
            raise EstimationError("step halving failed to improve the likelihood")
        beta, ll = cand, ll_cand
        grad = log_likelihood_gradient(X, y, beta)
        if np.abs(beta).max() > MAX_ABS_COEF:
            big = [cols[i] for i in np.flatnonzero(np.abs(beta) > MAX_ABS_COEF)]
            raise EstimationError(f"separation detected; runaway coefficients: {big}")
    else:
        raise EstimationError(
            f"Newton did not converge in {MAX_NEWTON_ITERATIONS} iterations "
            f"(gradient sup-norm {np.abs(grad).max():.3e})")

    p = _sigmoid(X @ beta)
    H = X.T @ (X * (p * (1 - p))[:, None])
    cov = np.linalg.inv(H)

    # default prediction profile: mean for continuous, mode for binary columns
    profile = []
    for c_i, c in enumerate(covariates):
        col = X[:, 1 + c_i]
        vals = np.unique(col)
        if len(vals) <= 2 and set(vals).issubset({0.0, 1.0}):
            profile.append(float(np.round(col.mean())))
        else:
            profile.append(float(col.mean()))

    return LogisticFit(coef=beta, columns=tuple(cols), cov=cov, log_lik=ll,
                       iterations=it, gradient_norm=float(np.abs(grad).max()),
                       snfs=tuple(snfs), types=tuple(types),
                       covariates=tuple(covariates),
                       default_profile=tuple(profile))


def _pivoted_qr(X: np.ndarray):
    from scipy.linalg import qr

    Q, R, piv = qr(X, mode="economic", pivoting=True)
    return Q, R, piv


# ----------------------------------------------------------------------
# rate tables
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RateTable:
    """Adjusted readmission rates (percent) by facility and patient type,
    optionally with bootstrap confidence bounds."""

    snfs: tuple[str, ...]
    types: tuple[str, ...]
    point: np.ndarray                      # (num snfs, num types), percent
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    reference_profile: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.point, dtype=float)
        if np.any(p < 0) or np.any(p > 100):
            raise EstimationError("rates must lie in [0, 100] percent")
        if self.lower is not None and self.upper is not None:
            if np.any(self.lower > p + 1e-9) or np.any(p > self.upper + 1e-9):
                raise EstimationError("bounds must bracket the point estimates")

    def rate(self, snf: str, patient_type: str) -> float:
        return float(self.point[self.snfs.index(snf), self.types.index(patient_type)])

    def costs_matrix(self) -> list[list[float]]:
        """Rows per patient type over facilities, the orientation the
        instance file format's ``costs`` block uses."""
        return self.point.T.tolist()

    def to_dict(self) -> dict:
        out = {"snfs": list(self.snfs), "types": list(self.types),
               "rates": self.point.tolist(),
               "reference_profile": dict(self.reference_profile),
               "costs": self.costs_matrix()}
        if self.lower is not None:
            out["lower"] = self.lower.tolist()
            out["upper"] = self.upper.tolist()
        return out


def _profile_vector(fit: LogisticFit, reference_profile) -> tuple[np.ndarray, dict]:
    if reference_profile is None:
        vec = np.asarray(fit.default_profile)
        return vec, dict(zip(fit.covariates, fit.default_profile))
    missing = [c for c in fit.covariates if c not in reference_profile]
    if missing:
        raise EstimationError(f"reference profile missing covariates {missing}")
    vec = np.array([float(reference_profile[c]) for c in fit.covariates])
    return vec, {c: float(reference_profile[c]) for c in fit.covariates}


def predict_rates(fit: LogisticFit, reference_profile=None) -> RateTable:
    """Per-cell adjusted rates at a covariate profile (defaults to the
    training data's means/modes)."""
    vec, prof = _profile_vector(fit, reference_profile)
    point = np.array([[100.0 * fit.cell_probability(s, t, vec) for t in fit.types]
                      for s in fit.snfs])
    return RateTable(snfs=fit.snfs, types=fit.types, point=point,
                     reference_profile=prof)


def bootstrap_ci(records: Sequence[DischargeRecord], covariates: Sequence[str],
                 reference_profile=None, num_resamples: int = 200,
                 seed: int = 0, max_failure_fraction: float = 0.05) -> RateTable:
    """Percentile bootstrap (2.5 / 97.5) of the per-cell rates.

    Resamples records with replacement, refits, and collects cell rates;
    more than ``max_failure_fraction`` failed refits aborts.
    """
    if num_resamples < 100:
        raise EstimationError("need at least 100 bootstrap resamples")
    fit = fit_logistic(records, covariates)
    vec, prof = _profile_vector(fit, reference_profile)
    point = np.array([[100.0 * fit.cell_probability(s, t, vec) for t in fit.types]
                      for s in fit.snfs])

    rng = np.random.default_rng(seed)
    n = len(records)
    draws = []
    failures = 0
    for _ in range(num_resamples):
        idx = rng.integers(0, n, size=n)
        sample = [records[i] for i in idx]
        try:
            bfit = fit_logistic(sample, covariates)
            draws.append([[100.0 * bfit.cell_probability(s, t, vec)
                           if (s in bfit.snfs and t in bfit.types) else np.nan
                           for t in fit.types] for s in fit.snfs])
        except EstimationError:
            failures += 1
    if failures > max_failure_fraction * num_resamples:
        raise EstimationError(
            f"{failures}/{num_resamples} bootstrap refits failed")
    arr = np.asarray(draws)
    lower = np.nanpercentile(arr, 2.5, axis=0)
    upper = np.nanpercentile(arr, 97.5, axis=0)
    # the percentile band may narrowly exclude the full-sample point; widen
    lower = np.minimum(lower, point)
    upper = np.maximum(upper, point)
    return RateTable(snfs=fit.snfs, types=fit.types, point=point,
                     lower=lower, upper=upper, reference_profile=prof)
