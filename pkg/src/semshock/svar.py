"""Daily VAR on yield changes and stock returns, with sign-identified shocks.

The reduced-form residual covariance is factorized by a lower-triangular
Cholesky; random orthonormal rotations of the factor are drawn until the
impact responses satisfy the configured sign pattern and maturity orderings,
and the first admissible rotation defines the structural shocks.
"""

from __future__ import annotations

import datetime
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import InputError, NumericError
from .ingest import SHOCK_NAMES, ShockPanel

log = logging.getLogger(__name__)

MARKET_COLUMNS = ("dy2", "dy5", "dy10", "dlogS")
MATURITY_ORDERS = ("short_dominant", "long_dominant", "free")
_SHORT_ROW, _LONG_ROW = 0, 2   # dy2 and dy10 rows


@dataclass
class MarketPanel:
    """Daily yield changes (2/5/10yr) and log stock returns."""

    dates: list[datetime.date]
    y: np.ndarray   # (days, 4)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim != 2 or self.y.shape[1] != 4:
            raise InputError(f"market panel must have 4 columns, got shape {self.y.shape}")
        if self.y.shape[0] != len(self.dates):
            raise InputError("market panel dates and rows disagree")
        if not np.all(np.isfinite(self.y)):
            raise InputError("market panel contains non-finite values")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass
class VarModel:
    """Reduced-form VAR fit: intercept, lag coefficient matrices, residuals."""

    intercept: np.ndarray          # (4,)
    coeffs: list[np.ndarray]       # L matrices, each (4, 4)
    residuals: np.ndarray          # (days - L, 4)
    sigma: np.ndarray              # (4, 4)
    dates: list[datetime.date]     # dates of the residual rows

    @property
    def lag_order(self) -> int:
        return len(self.coeffs)


@dataclass
class SignRestrictions:
    """Impact sign pattern (rows: dy2, dy5, dy10, dlogS; one column per shock)
    plus a maturity-dominance keyword per shock."""

    signs: np.ndarray                      # (4, 4) over {-1, 0, +1}
    maturity_order: tuple[str, str, str, str]

    def __post_init__(self):
        self.signs = np.asarray(self.signs, dtype=int)
        if self.signs.shape != (4, 4):
            raise InputError("sign matrix must be 4x4")
        if not np.all(np.isin(self.signs, (-1, 0, 1))):
            raise InputError("sign entries must be in {-1, 0, +1}")
        for j in range(4):
            if np.count_nonzero(self.signs[:, j]) < 2:
                raise InputError(f"shock column {SHOCK_NAMES[j]} needs >= 2 sign entries")
        if len(self.maturity_order) != 4:
            raise InputError("need one maturity order per shock")
        for order in self.maturity_order:
            if order not in MATURITY_ORDERS:
                raise InputError(f"unknown maturity order {order!r}")


def default_restrictions() -> SignRestrictions:
    """Growth (+,+,.,+), monetary (+,+,.,-), common premium (-,-,-,-) and
    hedging premium (.,+,+,-), the premia dominant at the long maturity."""
    signs = np.array(
        [
            [+1, +1, -1, 0],
            [+1, +1, -1, +1],
            [0, 0, -1, +1],
            [+1, -1, -1, -1],
        ],
        dtype=int,
    )
    return SignRestrictions(signs=signs, maturity_order=("free", "free", "long_dominant", "long_dominant"))


@dataclass
class StructuralFactors:
    """Accepted factorization: residual = P Q shocks, with P Pt = sigma."""

    P: np.ndarray
    Q: np.ndarray
    shocks: np.ndarray          # (days - L, 4)
    draws_tried: int
    seed: int

    @property
    def impact(self) -> np.ndarray:
        return self.P @ self.Q


def load_market_csv(source) -> MarketPanel:
    """Load the raw market CSV (header: date,dy2,dy5,dy10,dlogS)."""
    frame = source if isinstance(source, pd.DataFrame) else pd.read_csv(source)
    missing = [c for c in ("date",) + MARKET_COLUMNS if c not in frame.columns]
    if missing:
        raise InputError(f"market table missing columns: {', '.join(missing)}")
    dates = [datetime.date.fromisoformat(str(v)) for v in frame["date"]]
    for i in range(1, len(dates)):
        if dates[i] <= dates[i - 1]:
            raise InputError(f"market dates not strictly increasing at row {i}")
    y = frame[list(MARKET_COLUMNS)].to_numpy(dtype=float)
    return MarketPanel(dates=dates, y=y)


def load_restrictions_csv(source) -> SignRestrictions:
    """Parse a restrictions table: one row per shock with columns
    shock,dy2,dy5,dy10,dlogS,maturity_order."""
    frame = source if isinstance(source, pd.DataFrame) else pd.read_csv(source)
    needed = ["shock", *MARKET_COLUMNS, "maturity_order"]
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise InputError(f"restrictions table missing columns: {', '.join(missing)}")
    signs = np.zeros((4, 4), dtype=int)
    orders = ["free"] * 4
    seen = set()
    for _, row in frame.iterrows():
        name = str(row["shock"])
        if name not in SHOCK_NAMES:
            raise InputError(f"unknown shock name {name!r} in restrictions")
        j = SHOCK_NAMES.index(name)
        seen.add(name)
        for i, col in enumerate(MARKET_COLUMNS):
            signs[i, j] = int(row[col])
        orders[j] = str(row["maturity_order"])
    if seen != set(SHOCK_NAMES):
        raise InputError("restrictions table must cover all four shocks")
    return SignRestrictions(signs=signs, maturity_order=tuple(orders))


def fit_var(panel: MarketPanel, lag_order: int = 5) -> VarModel:
    """Equation-by-equation least squares of y_t on an intercept and L lags."""
    if lag_order < 1:
        raise InputError(f"VAR lag order must be >= 1, got {lag_order}")
    n = len(panel)
    if n <= 4 * lag_order + 8:
        raise InputError(f"need more than {4 * lag_order + 8} observations for lag order {lag_order}")
    y = panel.y
    targets = y[lag_order:]
    blocks = [np.ones((n - lag_order, 1))]
    for j in range(1, lag_order + 1):
        blocks.append(y[lag_order - j : n - j])
    X = np.hstack(blocks)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise InputError("rank-deficient VAR regressor matrix")
    B, _, _, _ = np.linalg.lstsq(X, targets, rcond=None)
    residuals = targets - X @ B
    sigma = residuals.T @ residuals / (n - lag_order)
    sigma = (sigma + sigma.T) / 2.0
    coeffs = [B[1 + 4 * j : 1 + 4 * (j + 1)].T for j in range(lag_order)]
    return VarModel(
        intercept=B[0],
        coeffs=coeffs,
        residuals=residuals,
        sigma=sigma,
        dates=list(panel.dates[lag_order:]),
    )


def _irf_multiplier(model: VarModel, horizon: int) -> np.ndarray:
    """Reduced-form MA coefficient at ``horizon`` (identity at horizon 0)."""
    if horizon == 0:
        return np.eye(4)
    L = model.lag_order
    companion = np.zeros((4 * L, 4 * L))
    for j, A in enumerate(model.coeffs):
        companion[:4, 4 * j : 4 * (j + 1)] = A
    if L > 1:
        companion[4:, :-4] = np.eye(4 * (L - 1))
    power = np.linalg.matrix_power(companion, horizon)
    return power[:4, :4]


def _haar_rotation(rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((4, 4))
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def _polar(a: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(a)
    return u @ vt


def _frame_center(stack: np.ndarray, iterations: int = 60) -> np.ndarray:
    """Orthonormal frame maximizing per-column squared-cosine agreement.

    Alternating ascent: given the current frame, push each column through
    its scatter matrix and re-orthonormalize. Sign-free by construction
    (scatter matrices are quadratic in the columns).
    """
    scatter = np.einsum("nij,nkj->ikj", stack, stack) / len(stack)
    cols = []
    for j in range(4):
        _, vecs = np.linalg.eigh(scatter[:, :, j])
        cols.append(vecs[:, -1])
    frame = _polar(np.stack(cols, axis=1))
    for _ in range(iterations):
        pushed = np.stack([scatter[:, :, j] @ frame[:, j] for j in range(4)], axis=1)
        updated = _polar(pushed)
        if np.max(np.abs(np.abs(updated) - np.abs(frame))) < 1e-12:
            frame = updated
            break
        frame = updated
    return frame


def _normalize_and_check(irf: np.ndarray, restrictions: SignRestrictions):
    """Column sign normalization followed by the strict sign/maturity check.

    Returns (flips, ok): flips is the per-column +-1 vector making the
    largest-magnitude restricted entry match its required sign.
    """
    signs = restrictions.signs
    flips = np.ones(4)
    for j in range(4):
        rows = np.flatnonzero(signs[:, j])
        anchor = rows[np.argmax(np.abs(irf[rows, j]))]
        if irf[anchor, j] * signs[anchor, j] < 0:
            flips[j] = -1.0
    adjusted = irf * flips
    for j in range(4):
        rows = np.flatnonzero(signs[:, j])
        if np.any(adjusted[rows, j] * signs[rows, j] <= 0):
            return flips, False
        order = restrictions.maturity_order[j]
        if order == "long_dominant" and not (abs(adjusted[_LONG_ROW, j]) > abs(adjusted[_SHORT_ROW, j])):
            return flips, False
        if order == "short_dominant" and not (abs(adjusted[_SHORT_ROW, j]) > abs(adjusted[_LONG_ROW, j])):
            return flips, False
    return flips, True


def identify_shocks(
    model: VarModel,
    restrictions: SignRestrictions | None = None,
    budget: int = 10_000,
    seed: int = 0,
    horizon: int = 0,
    mode: str = "first",
) -> StructuralFactors:
    """Search random orthonormal rotations of the Cholesky factor for one whose
    impulse responses satisfy the sign restrictions.

    ``mode='first'`` accepts the lowest-index admissible draw (deterministic
    given the seed); ``mode='median'`` evaluates the whole budget and keeps
    the admissible draw closest to the entrywise median admissible impact.
    """
    if restrictions is None:
        restrictions = default_restrictions()
    if budget < 1:
        raise InputError(f"rotation budget must be >= 1, got {budget}")
    if mode not in ("first", "median"):
        raise InputError(f"unknown rotation mode {mode!r}")
    try:
        P = np.linalg.cholesky(model.sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"residual covariance is not positive definite: {exc}") from exc
    multiplier = _irf_multiplier(model, horizon)

    children = np.random.SeedSequence(seed).spawn(budget)
    accepted: list[tuple[int, np.ndarray]] = []
    for i in range(budget):
        rng = np.random.default_rng(children[i])
        Q = _haar_rotation(rng)
        irf = multiplier @ P @ Q
        flips, ok = _normalize_and_check(irf, restrictions)
        if not ok:
            continue
        Q = Q * flips
        if mode == "first":
            accepted.append((i, Q))
            break
        accepted.append((i, Q))

    if not accepted:
        raise InputError(
            f"no admissible rotation in {budget} draws; sign restrictions appear "
            f"inconsistent with the residual covariance"
        )
    if mode == "first":
        draw_index, Q = accepted[0]
    else:
        # Sign restrictions only set-identify the rotation, so a single
        # admissible draw can sit anywhere in a wide set. The median mode
        # instead returns the set's central rotation: the orthonormal frame
        # maximizing squared-cosine agreement with every admissible draw
        # (column signs in a rotation are arbitrary, so agreement is
        # measured per column without sign alignment). Falls back to the
        # closest admissible draw if the center drifts outside the
        # restrictions.
        raw = np.stack([q for _, q in accepted])
        Q_center = _frame_center(raw)
        irf = multiplier @ P @ Q_center
        flips, ok = _normalize_and_check(irf, restrictions)
        if ok:
            Q = Q_center * flips
            draw_index = accepted[-1][0]
        else:
            scores = np.einsum("nij,ij->nj", raw, Q_center) ** 2
            best = int(np.argmax(scores.sum(axis=1)))
            draw_index, Q = accepted[best]
        log.info("median rotation mode: %d admissible draws in %d tried",
                 len(accepted), accepted[-1][0] + 1)

    impact = P @ Q
    shocks = np.linalg.solve(impact, model.residuals.T).T
    return StructuralFactors(P=P, Q=Q, shocks=shocks, draws_tried=draw_index + 1, seed=seed)


def shocks_to_panel(model: VarModel, factors: StructuralFactors) -> ShockPanel:
    """Package identified shocks as a ShockPanel on the residual dates."""
    series = {name: factors.shocks[:, j].copy() for j, name in enumerate(SHOCK_NAMES)}
    return ShockPanel(dates=list(model.dates), series=series)
