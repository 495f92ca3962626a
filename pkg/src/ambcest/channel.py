"""Correlated Rayleigh channel simulator and pilot-phase observation generator.

Model: a reader with an M-element array receives y(n) = h*s(n) + alpha*f*g*s(n)*c(n) + u(n),
real-valued throughout.  During the two pilot phases the source sends s(n) = 1, the tag
holds c(n) = 0 (phase A, direct link h) or c(n) = 1 (phase B, composite link w = h + alpha*f*g),
so every pilot sample reduces to x + u(n) with u(n) ~ N(0, sigma_u^2 I_M).

Pilot samples are reshaped row-major from M-vectors to Ma x Mb matrices and stacked along a
trailing pilot axis, giving the Ma x Mb x P observation tensors consumed by the denoiser.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericError, ParameterError, ShapeError

LINK_DIRECT = "direct"
LINK_COMPOSITE = "composite"
LINKS = (LINK_DIRECT, LINK_COMPOSITE)

CORR_MODELS = ("identity", "exponential")


@dataclass(frozen=True)
class CorrelationSpec:
    """Family of antenna correlation matrices: identity or exponential rho^|i-j|."""

    model: str = "exponential"
    rho: float = 0.0
    dim: int = 1

    def __post_init__(self):
        if self.model not in CORR_MODELS:
            raise ParameterError(f"correlation model must be one of {CORR_MODELS}, got {self.model!r}")
        if not (0.0 <= self.rho < 1.0):
            raise ParameterError(f"rho must lie in [0, 1), got {self.rho}")
        if self.dim < 1:
            raise ParameterError(f"dim must be a positive integer, got {self.dim}")


def build_correlation_matrix(spec: CorrelationSpec) -> np.ndarray:
    """Return the dim x dim correlation matrix for `spec`.

    Exponential model: R[i, j] = rho^|i-j| (unit diagonal, symmetric PD for rho in [0, 1)).
    Identity model: I regardless of rho.
    """
    if spec.model == "identity" or spec.rho == 0.0:
        return np.eye(spec.dim)
    lags = np.abs(np.subtract.outer(np.arange(spec.dim), np.arange(spec.dim)))
    return spec.rho ** lags


def sample_gaussian_vector(R: np.ndarray, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw zero-mean Gaussian vectors with covariance R via the Cholesky factor.

    Returns shape (M,) when size is None, else (size, M).  Sample covariance over many
    draws converges to R.
    """
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ShapeError(f"R must be square, got shape {R.shape}")
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"covariance is not positive-definite: {exc}") from exc
    if size is None:
        return L @ rng.standard_normal(R.shape[0])
    z = rng.standard_normal((size, R.shape[0]))
    return z @ L.T


@dataclass(frozen=True)
class SystemConfig:
    """Operating point of the simulator: geometry, SNR/reflection levels, pilot counts.

    snr_db fixes the direct-link SNR E(||h||^2) / E(||u||^2) with unit pilots;
    zeta_db fixes the reflection-to-direct power ratio E(||alpha*f*g||^2) / E(||h||^2).
    f is the source-tag line-of-sight coefficient (constant; only alpha*f enters the model).
    """

    m: int = 64
    ma: int = 8
    mb: int = 8
    snr_db: float = -6.0
    zeta_db: float = -5.0
    f: float = 1.0
    corr_h: CorrelationSpec = field(default=None)  # type: ignore[assignment]
    corr_g: CorrelationSpec = field(default=None)  # type: ignore[assignment]
    na: int = 2
    nb: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.corr_h is None:
            object.__setattr__(self, "corr_h", CorrelationSpec("exponential", 0.9, self.m))
        if self.corr_g is None:
            object.__setattr__(self, "corr_g", CorrelationSpec("exponential", 0.9, self.m))
        if self.m < 1 or self.ma < 1 or self.mb < 1:
            raise ParameterError("antenna counts must be positive")
        if self.ma * self.mb != self.m:
            raise ParameterError(f"ma*mb must equal m: {self.ma}*{self.mb} != {self.m}")
        if self.na < 1 or self.nb < 1:
            raise ParameterError("pilot counts na, nb must be >= 1")
        if self.corr_h.dim != self.m or self.corr_g.dim != self.m:
            raise ParameterError("correlation spec dim must equal m")
        # fail fast on an inconsistent operating point
        derive_noise_and_alpha(self)

    def with_(self, **kwargs) -> "SystemConfig":
        """Copy with selected fields replaced (correlation dims follow m)."""
        if "m" in kwargs and "corr_h" not in kwargs:
            kwargs["corr_h"] = replace(self.corr_h, dim=kwargs["m"])
        if "m" in kwargs and "corr_g" not in kwargs:
            kwargs["corr_g"] = replace(self.corr_g, dim=kwargs["m"])
        return replace(self, **kwargs)

    @property
    def sigma_u_sq(self) -> float:
        """Noise variance implied by snr_db and the direct-link correlation trace."""
        return derive_noise_and_alpha(self)[0]

    @property
    def alpha(self) -> float:
        """Reflection coefficient implied by zeta_db, f, and the correlation traces."""
        return derive_noise_and_alpha(self)[1]


def derive_noise_and_alpha(cfg: SystemConfig) -> tuple[float, float]:
    """Solve the SNR and zeta definitions for (sigma_u^2, alpha) with unit pilots.

    sigma_u^2 = trace(R_h) / (M * 10^(snr_db/10))
    alpha     = sqrt(10^(zeta_db/10) * trace(R_h) / (f^2 * trace(R_g)))
    """
    tr_h = float(np.trace(build_correlation_matrix(cfg.corr_h)))
    tr_g = float(np.trace(build_correlation_matrix(cfg.corr_g)))
    if tr_h <= 0 or tr_g <= 0:
        raise ParameterError("correlation traces must be positive")
    # snr_db = +inf is a legal noiseless operating point; snr_db = -inf is not
    if cfg.snr_db == float("-inf"):
        raise ParameterError("snr_db = -inf gives an infinite noise power")
    sigma_u_sq = tr_h / (cfg.m * 10.0 ** (cfg.snr_db / 10.0))
    zeta = 10.0 ** (cfg.zeta_db / 10.0)
    if zeta == 0.0:
        alpha = 0.0
    elif cfg.f == 0.0:
        raise ParameterError("f = 0 is incompatible with a finite zeta_db")
    else:
        alpha = float(np.sqrt(zeta * tr_h / (cfg.f**2 * tr_g)))
    if not np.isfinite(sigma_u_sq) or sigma_u_sq < 0:
        raise ParameterError(f"derived sigma_u^2 must be finite and >= 0, got {sigma_u_sq}")
    return sigma_u_sq, alpha


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the channel state: direct h, tag-reader g, composite w = h + alpha*f*g."""

    h: np.ndarray
    g: np.ndarray
    w: np.ndarray
    alpha: float
    f: float

    @classmethod
    def from_links(cls, h: np.ndarray, g: np.ndarray, alpha: float, f: float) -> "ChannelRealization":
        h = np.asarray(h, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if h.shape != g.shape or h.ndim != 1:
            raise ShapeError(f"h and g must be equal-length vectors, got {h.shape} and {g.shape}")
        w = h + alpha * f * g
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(g)) and np.isfinite(alpha)):
            raise NumericError("channel realization contains non-finite entries")
        return cls(h=h, g=g, w=w, alpha=alpha, f=f)


def sample_realization(cfg: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw one correlated channel realization at cfg's operating point."""
    _, alpha = derive_noise_and_alpha(cfg)
    h = sample_gaussian_vector(build_correlation_matrix(cfg.corr_h), rng)
    g = sample_gaussian_vector(build_correlation_matrix(cfg.corr_g), rng)
    return ChannelRealization.from_links(h, g, alpha, cfg.f)


@dataclass
class ObservationTensor:
    """Stacked pilot observations, shape Ma x Mb x P, plus the generating truth if known."""

    data: np.ndarray
    link: str
    truth: np.ndarray | None = None

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] < 1:
            raise ShapeError(f"observation tensor must be Ma x Mb x P with P >= 1, got {self.data.shape}")
        if self.link not in LINKS:
            raise ParameterError(f"link must be one of {LINKS}, got {self.link!r}")
        if self.truth is not None:
            self.truth = np.ascontiguousarray(self.truth, dtype=np.float64)
            if self.truth.shape != self.data.shape[:2]:
                raise ShapeError("truth must match the Ma x Mb geometry of the observations")

    @property
    def pilots(self) -> int:
        return self.data.shape[2]


def vec_to_mat(x: np.ndarray, ma: int, mb: int) -> np.ndarray:
    """Reshape an M-vector to Ma x Mb, row-major."""
    x = np.asarray(x)
    if x.shape[-1] != ma * mb:
        raise ShapeError(f"cannot reshape length-{x.shape[-1]} vector to {ma}x{mb}")
    return x.reshape(*x.shape[:-1], ma, mb)


def mat_to_vec(X: np.ndarray) -> np.ndarray:
    """Flatten Ma x Mb (or batch thereof) back to M-vectors, row-major."""
    X = np.asarray(X)
    if X.ndim < 2:
        raise ShapeError("expected at least a 2-D matrix")
    return X.reshape(*X.shape[:-2], X.shape[-2] * X.shape[-1])


def stack_pilots(samples: np.ndarray, ma: int, mb: int) -> np.ndarray:
    """Stack P pilot vectors (P, M) into an Ma x Mb x P tensor (row-major per slice)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ShapeError(f"expected (P, M) pilot samples, got shape {samples.shape}")
    return np.ascontiguousarray(np.moveaxis(vec_to_mat(samples, ma, mb), 0, -1))


def unstack_pilots(data: np.ndarray) -> np.ndarray:
    """Inverse of stack_pilots: Ma x Mb x P tensor back to (P, M) vectors."""
    data = np.asarray(data)
    if data.ndim != 3:
        raise ShapeError(f"expected Ma x Mb x P tensor, got shape {data.shape}")
    return mat_to_vec(np.moveaxis(data, -1, 0))


def widen_pilots(data: np.ndarray) -> np.ndarray:
    """Lay pilot slices side by side: (.., Ma, Mb, P) -> (.., Ma, P*Mb).

    Column p*Mb + b of the wide matrix is column b of pilot slice p, so the result is
    the block matrix [Y(0), Y(1), ..., Y(P-1)].
    """
    data = np.asarray(data)
    if data.ndim < 3:
        raise ShapeError(f"expected (.., Ma, Mb, P), got shape {data.shape}")
    ma, mb, p = data.shape[-3:]
    wide = np.moveaxis(data, -1, -2)  # (.., Ma, P, Mb)
    return np.ascontiguousarray(wide).reshape(*data.shape[:-3], ma, p * mb)


def narrow_pilots(wide: np.ndarray, pilots: int) -> np.ndarray:
    """Inverse of widen_pilots: (.., Ma, P*Mb) back to (.., Ma, Mb, P)."""
    wide = np.asarray(wide)
    if wide.ndim < 2 or wide.shape[-1] % pilots:
        raise ShapeError(f"last dim of {wide.shape} is not divisible by P = {pilots}")
    ma, mb = wide.shape[-2], wide.shape[-1] // pilots
    stacked = wide.reshape(*wide.shape[:-2], ma, pilots, mb)
    return np.ascontiguousarray(np.moveaxis(stacked, -2, -1))


def generate_pilot_frame(
    cfg: SystemConfig, real: ChannelRealization, rng: np.random.Generator
) -> tuple[ObservationTensor, ObservationTensor]:
    """Simulate the two pilot phases of one frame for a given channel realization.

    Phase A: Na samples of h + u(n).  Phase B: Nb samples of w + u(n).
    Noise is i.i.d. N(0, sigma_u^2 I_M); truth fields hold the reshaped h and w.
    """
    if real.h.shape[0] != cfg.m:
        raise ShapeError(f"realization has M={real.h.shape[0]}, config expects {cfg.m}")
    sigma_u_sq, alpha = derive_noise_and_alpha(cfg)
    if not np.isclose(alpha, real.alpha) or not np.isclose(cfg.f, real.f):
        raise ParameterError("realization was drawn at a different operating point than cfg")
    sigma = np.sqrt(sigma_u_sq)
    noise_a = sigma * rng.standard_normal((cfg.na, cfg.m))
    noise_b = sigma * rng.standard_normal((cfg.nb, cfg.m))
    phase_a = ObservationTensor(
        data=stack_pilots(real.h[None, :] + noise_a, cfg.ma, cfg.mb),
        link=LINK_DIRECT,
        truth=vec_to_mat(real.h, cfg.ma, cfg.mb),
    )
    phase_b = ObservationTensor(
        data=stack_pilots(real.w[None, :] + noise_b, cfg.ma, cfg.mb),
        link=LINK_COMPOSITE,
        truth=vec_to_mat(real.w, cfg.ma, cfg.mb),
    )
    return phase_a, phase_b


def composite_correlation(cfg: SystemConfig) -> np.ndarray:
    """Correlation matrix of the composite link: R_w = R_h + alpha^2 f^2 R_g."""
    _, alpha = derive_noise_and_alpha(cfg)
    R_h = build_correlation_matrix(cfg.corr_h)
    R_g = build_correlation_matrix(cfg.corr_g)
    return R_h + (alpha * cfg.f) ** 2 * R_g


def link_correlation(cfg: SystemConfig, link: str) -> np.ndarray:
    """True correlation matrix of the estimated channel on the given link."""
    if link == LINK_DIRECT:
        return build_correlation_matrix(cfg.corr_h)
    if link == LINK_COMPOSITE:
        return composite_correlation(cfg)
    raise ParameterError(f"link must be one of {LINKS}, got {link!r}")


def pilots_for_link(cfg: SystemConfig, link: str) -> int:
    if link == LINK_DIRECT:
        return cfg.na
    if link == LINK_COMPOSITE:
        return cfg.nb
    raise ParameterError(f"link must be one of {LINKS}, got {link!r}")


def simulate_batch(
    cfg: SystemConfig, link: str, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n independent (observation, truth) pairs for one link.

    Returns Y with shape (n, Ma, Mb, P) and the noiseless truth X with shape (n, Ma, Mb).
    Each pair uses a fresh channel realization and fresh noise.  This is the Monte Carlo
    workhorse: channels are drawn in one batched Cholesky product.
    """
    if n < 1:
        raise ParameterError(f"batch size must be >= 1, got {n}")
    sigma_u_sq, alpha = derive_noise_and_alpha(cfg)
    p = pilots_for_link(cfg, link)
    h = sample_gaussian_vector(build_correlation_matrix(cfg.corr_h), rng, size=n)
    if link == LINK_COMPOSITE:
        g = sample_gaussian_vector(build_correlation_matrix(cfg.corr_g), rng, size=n)
        x = h + alpha * cfg.f * g
    else:
        x = h
    noise = np.sqrt(sigma_u_sq) * rng.standard_normal((n, p, cfg.m))
    samples = x[:, None, :] + noise  # (n, P, M)
    y = np.ascontiguousarray(np.moveaxis(vec_to_mat(samples, cfg.ma, cfg.mb), 1, -1))
    return y, vec_to_mat(x, cfg.ma, cfg.mb)
