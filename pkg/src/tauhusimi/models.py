"""Physical objects: truncated oscillator quadratures, Pauli matrices and a state catalog."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import special

from .errors import ValidationError
from .linalg import hermitian

TRACE_TOL = 1e-10
PSD_TOL = 1e-10
TAIL_TOL = 1e-8


@dataclass(frozen=True)
class HilbertConfig:
    """Truncation dimension, ``hbar`` and the padding used for working operators."""

    dim: int
    hbar: float = 1.0
    pad: int = 8

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValidationError(f"dim must be an integer >= 2, got {self.dim}")
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise ValidationError(f"hbar must be > 0, got {self.hbar}")
        if int(self.pad) != self.pad or self.pad < 0:
            raise ValidationError(f"pad must be a non-negative integer, got {self.pad}")

    @property
    def dim_work(self) -> int:
        return self.dim + self.pad

    def working(self) -> "HilbertConfig":
        """Config at the padded dimension (no further padding)."""
        return HilbertConfig(self.dim_work, self.hbar, 0)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Unit-trace positive semidefinite Hermitian matrix.

    ``factor`` optionally carries ``B`` with ``matrix == B @ B^H``; it is
    derived from the spectrum when not supplied.
    """

    matrix: np.ndarray
    hbar: float = 1.0
    factor: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        m = hermitian(self.matrix)
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"density matrix trace is {tr!r}, expected 1")
        lam, vecs = np.linalg.eigh(m)
        if lam[0] < -PSD_TOL:
            raise ValidationError(f"density matrix has negative eigenvalue {lam[0]:.3e}")
        object.__setattr__(self, "matrix", m)
        if self.factor is None:
            keep = lam > 1e-16 * lam[-1]
            b = vecs[:, keep] * np.sqrt(lam[keep])
        else:
            b = np.asarray(self.factor, dtype=complex)
            if b.ndim == 1:
                b = b[:, None]
            if b.shape[0] != m.shape[0]:
                raise ValidationError("factor rows must match the density matrix dimension")
        b = np.array(b, dtype=complex)
        b.setflags(write=False)
        object.__setattr__(self, "factor", b)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def embed(self, dim: int) -> "DensityMatrix":
        """Zero-extend into a ``dim``-level space (``dim >= self.dim``)."""
        if dim == self.dim:
            return self
        if dim < self.dim:
            raise ValidationError(f"cannot embed a {self.dim}-level state into {dim} levels")
        m = np.zeros((dim, dim), dtype=complex)
        m[: self.dim, : self.dim] = self.matrix
        b = np.zeros((dim, self.factor.shape[1]), dtype=complex)
        b[: self.dim] = self.factor
        return DensityMatrix(m, self.hbar, b)

    def expectation(self, op) -> float:
        op = np.asarray(op)
        return float(np.sum(self.matrix * op.T).real)

    def support(self) -> int:
        """Number of leading basis levels carrying the state (trailing zero rows trimmed)."""
        nz = np.flatnonzero(np.any(self.factor != 0, axis=1))
        return int(nz[-1]) + 1 if nz.size else 1


@dataclass(frozen=True, eq=False)
class ObservableSet:
    """Ordered Hermitian observables on one Hilbert space."""

    observables: tuple
    labels: tuple
    hbar: float = 1.0

    def __post_init__(self):
        obs = tuple(hermitian(o) for o in self.observables)
        if not obs:
            raise ValidationError("an observable set needs at least one observable")
        dims = {o.shape[0] for o in obs}
        if len(dims) != 1:
            raise ValidationError(f"observables have mismatched dimensions {sorted(dims)}")
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != len(obs):
            raise ValidationError("one label per observable is required")
        object.__setattr__(self, "observables", obs)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.observables[0].shape[0]

    @property
    def n(self) -> int:
        return len(self.observables)

    def __len__(self):
        return self.n

    def __getitem__(self, k):
        return self.observables[k]

    def commuting(self, rtol=1e-12) -> bool:
        for i, a in enumerate(self.observables):
            for b in self.observables[i + 1 :]:
                c = a @ b - b @ a
                if np.max(np.abs(c)) > rtol * max(1.0, np.max(np.abs(a)) * np.max(np.abs(b))):
                    return False
        return True

    def is_canonical_pair(self) -> bool:
        return self.labels == ("X", "P")

    def subset(self, idx: Sequence[int]) -> "ObservableSet":
        return ObservableSet(tuple(self.observables[i] for i in idx), tuple(self.labels[i] for i in idx), self.hbar)


# ---------------------------------------------------------------- operators


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def canonical_pair(cfg: HilbertConfig) -> ObservableSet:
    """Truncated ``X = sqrt(hbar/2)(a + a^H)`` and ``P = i sqrt(hbar/2)(a^H - a)`` at ``cfg.dim``."""
    a = annihilation(cfg.dim)
    ad = a.conj().T
    c = math.sqrt(cfg.hbar / 2)
    x = c * (a + ad)
    p = 1j * c * (ad - a)
    return ObservableSet((x, p), ("X", "P"), cfg.hbar)


def number_operator(cfg: HilbertConfig) -> ObservableSet:
    return ObservableSet((np.diag(np.arange(cfg.dim, dtype=float)).astype(complex),), ("N",), cfg.hbar)


PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_set(which="xyz") -> ObservableSet:
    """Pauli matrices in the requested order, e.g. ``"xyz"`` or ``["z"]``."""
    keys = [str(k).lower().removeprefix("s") for k in which]
    if not keys:
        raise ValidationError("pauli_set needs a non-empty subset of {x, y, z}")
    for k in keys:
        if k not in PAULI:
            raise ValidationError(f"unknown Pauli label {k!r}")
    if len(set(keys)) != len(keys):
        raise ValidationError("repeated Pauli label")
    return ObservableSet(tuple(PAULI[k] for k in keys), tuple("S" + k for k in keys), 1.0)


def observables_from_labels(labels: Sequence[str], cfg: HilbertConfig | None = None) -> ObservableSet:
    """Build an observable set from labels ``X P N Sx Sy Sz``.

    Oscillator labels use ``cfg.dim_work``; Pauli labels cannot be mixed with them.
    """
    labels = [str(s) for s in labels]
    spin = [s for s in labels if s.lower() in ("sx", "sy", "sz")]
    if spin and len(spin) != len(labels):
        raise ValidationError("cannot mix Pauli and oscillator observables")
    if spin:
        return pauli_set([s[1] for s in spin])
    if cfg is None:
        raise ValidationError("oscillator observables need a HilbertConfig")
    work = cfg.working()
    xp = canonical_pair(work)
    table = {"X": xp[0], "P": xp[1], "N": number_operator(work)[0]}
    mats = []
    for s in labels:
        if s not in table:
            raise ValidationError(f"unknown observable label {s!r}")
        mats.append(table[s])
    return ObservableSet(tuple(mats), tuple(labels), cfg.hbar)


# ------------------------------------------------------------------- states


@dataclass(frozen=True)
class StateSpec:
    """State recipe; textual form ``kind:params`` (see :func:`parse_state_spec`)."""

    kind: str
    params: Mapping = field(default_factory=dict)

    def __str__(self):
        return format_state_spec(self)


_NAMED = {"coherent", "cat", "random"}


def _split_kv(body):
    out = {}
    for item in filter(None, body.split(",")):
        if "=" not in item:
            raise ValidationError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_state_spec(text: str) -> StateSpec:
    """Parse e.g. ``coherent:re=1.0,im=0.0``, ``bloch:0,0,1``, ``fock:2``,
    ``thermal:0.5``, ``random:seed=7,rank=2``, ``cat:re=1.5``, ``diag:0.3,0.7``,
    ``mixed:0.3@fock:0|0.7@fock:1``."""
    if isinstance(text, StateSpec):
        return text
    text = str(text).strip()
    kind, _, body = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "fock":
            return StateSpec("fock", {"n": int(body)})
        if kind == "thermal":
            return StateSpec("thermal", {"nbar": float(body)})
        if kind == "bloch":
            vec = [float(v) for v in body.split(",")]
            if len(vec) != 3:
                raise ValidationError("bloch needs three components")
            return StateSpec("bloch", {"r": tuple(vec)})
        if kind == "diag":
            return StateSpec("diag", {"p": tuple(float(v) for v in body.split(","))})
        if kind in ("coherent", "cat"):
            kv = _split_kv(body)
            params = {"re": float(kv.pop("re", 0.0)), "im": float(kv.pop("im", 0.0))}
            if kind == "cat":
                params["parity"] = int(kv.pop("parity", 1))
            if kv:
                raise ValidationError(f"unknown {kind} parameters {sorted(kv)}")
            return StateSpec(kind, params)
        if kind == "random":
            kv = _split_kv(body)
            params = {"seed": int(kv.pop("seed", 0))}
            if "rank" in kv:
                params["rank"] = int(kv.pop("rank"))
            if kv:
                raise ValidationError(f"unknown random parameters {sorted(kv)}")
            return StateSpec("random", params)
        if kind == "mixed":
            parts = []
            for item in body.split("|"):
                w, _, sub = item.partition("@")
                parts.append((float(w), parse_state_spec(sub)))
            return StateSpec("mixed", {"parts": tuple(parts)})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"cannot parse state spec {text!r}: {exc}") from None
    raise ValidationError(f"unknown state kind {kind!r} in {text!r}")


def format_state_spec(spec: StateSpec) -> str:
    p = spec.params
    if spec.kind == "fock":
        return f"fock:{p['n']}"
    if spec.kind == "thermal":
        return f"thermal:{p['nbar']!r}"
    if spec.kind == "bloch":
        return "bloch:" + ",".join(repr(float(v)) for v in p["r"])
    if spec.kind == "diag":
        return "diag:" + ",".join(repr(float(v)) for v in p["p"])
    if spec.kind == "coherent":
        return f"coherent:re={p['re']!r},im={p['im']!r}"
    if spec.kind == "cat":
        return f"cat:re={p['re']!r},im={p['im']!r},parity={p.get('parity', 1)}"
    if spec.kind == "random":
        s = f"random:seed={p['seed']}"
        return s + (f",rank={p['rank']}" if "rank" in p else "")
    if spec.kind == "mixed":
        return "mixed:" + "|".join(f"{w!r}@{format_state_spec(s)}" for w, s in p["parts"])
    raise ValidationError(f"unknown state kind {spec.kind!r}")


def coherent_amplitudes(alpha, dim: int) -> np.ndarray:
    """Untruncated Fock amplitudes ``exp(-|alpha|^2/2) alpha^n / sqrt(n!)`` for ``n < dim``.

    Scalar *alpha* gives shape ``(dim,)``; an array of amplitudes gives ``(len(alpha), dim)``.
    """
    al = np.asarray(alpha, dtype=complex)
    flat = np.atleast_1d(al).ravel()
    n = np.arange(dim)
    r = np.abs(flat)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logmag = -0.5 * r * r + n * np.log(r) - 0.5 * special.gammaln(n + 1)
    logmag = np.where(r == 0, np.where(n == 0, 0.0, -np.inf), logmag)
    out = np.exp(logmag) * np.exp(1j * np.angle(flat)[:, None] * n)
    return out[0] if al.ndim == 0 else out


def _ket_state(ket, tail, max_tail, hbar, what):
    if tail > max_tail:
        raise ValidationError(f"{what}: truncation tail mass {tail:.3e} exceeds {max_tail:.1e}")
    ket = ket / np.linalg.norm(ket)
    return DensityMatrix(np.outer(ket, ket.conj()), hbar, ket[:, None])


def make_state(spec, cfg: HilbertConfig | None = None, max_tail: float = TAIL_TOL) -> DensityMatrix:
    """Construct a catalog state.

    Oscillator states live at ``cfg.dim``; ``bloch`` states are qubits.  Coherent
    and cat kets are renormalized after truncation provided the discarded
    tail mass is at most ``max_tail``.
    """
    spec = parse_state_spec(spec)
    kind, p = spec.kind, spec.params
    hbar = cfg.hbar if cfg is not None else 1.0
    if kind == "bloch":
        r = np.asarray(p["r"], dtype=float)
        norm = float(np.linalg.norm(r))
        if norm > 1 + 1e-12:
            raise ValidationError(f"bloch vector norm {norm:.6g} exceeds 1")
        m = 0.5 * (np.eye(2) + sum(c * PAULI[k] for c, k in zip(r, "xyz")))
        return DensityMatrix(m, hbar)
    if kind == "diag":
        w = np.asarray(p["p"], dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1) > TRACE_TOL:
            raise ValidationError(f"diag weights must be non-negative and sum to 1, got {w.tolist()}")
        if cfg is not None and cfg.dim != w.size and w.size != 2:
            raise ValidationError(f"diag has {w.size} entries but dim is {cfg.dim}")
        return DensityMatrix(np.diag(w).astype(complex), hbar)
    if kind == "mixed":
        parts = p["parts"]
        ws = np.array([w for w, _ in parts], dtype=float)
        if np.any(ws < 0) or abs(ws.sum() - 1) > TRACE_TOL:
            raise ValidationError("mixture weights must be non-negative and sum to 1")
        states = [make_state(s, cfg, max_tail) for _, s in parts]
        dims = {s.dim for s in states}
        if len(dims) != 1:
            raise ValidationError("mixture components have different dimensions")
        m = sum(w * s.matrix for w, s in zip(ws, states))
        return DensityMatrix(m, hbar)

    if cfg is None:
        raise ValidationError(f"{kind} states need a HilbertConfig")
    dim = cfg.dim
    if kind == "fock":
        n = p["n"]
        if not 0 <= n < dim:
            raise ValidationError(f"fock level {n} outside truncation dim {dim}")
        ket = np.zeros(dim, dtype=complex)
        ket[n] = 1.0
        return DensityMatrix(np.outer(ket, ket), hbar, ket[:, None])
    if kind == "coherent":
        alpha = complex(p["re"], p["im"])
        ket = coherent_amplitudes(alpha, dim)
        # P(Poisson(|a|^2) >= dim) is the regularized lower incomplete gamma
        tail = float(special.gammainc(dim, abs(alpha) ** 2)) if alpha != 0 else 0.0
        return _ket_state(ket, tail, max_tail, hbar, f"coherent({alpha})")
    if kind == "cat":
        alpha = complex(p["re"], p["im"])
        parity = p.get("parity", 1)
        if parity not in (1, -1):
            raise ValidationError("cat parity must be +1 or -1")
        big = dim + 64 + int(8 * abs(alpha) ** 2)
        full = coherent_amplitudes(alpha, big) + parity * coherent_amplitudes(-alpha, big)
        total = float(np.sum(np.abs(full) ** 2))
        if total < 1e-300:
            raise ValidationError("cat state with these parameters vanishes")
        tail = float(np.sum(np.abs(full[dim:]) ** 2)) / total
        return _ket_state(full[:dim], tail, max_tail, hbar, f"cat({alpha})")
    if kind == "thermal":
        nbar = p["nbar"]
        if nbar < 0:
            raise ValidationError(f"thermal occupation must be >= 0, got {nbar}")
        if nbar == 0:
            ket = np.zeros(dim, dtype=complex)
            ket[0] = 1.0
            return DensityMatrix(np.outer(ket, ket), hbar, ket[:, None])
        q = nbar / (1 + nbar)
        tail = q**dim
        if tail > max_tail:
            raise ValidationError(f"thermal({nbar}): truncation tail mass {tail:.3e} exceeds {max_tail:.1e}")
        w = (1 - q) * q ** np.arange(dim)
        w /= w.sum()
        return DensityMatrix(np.diag(w).astype(complex), hbar, np.diag(np.sqrt(w)).astype(complex))
    if kind == "random":
        rng = np.random.default_rng(p["seed"])
        rank = p.get("rank", dim)
        if not 1 <= rank <= dim:
            raise ValidationError(f"random rank must be in [1, {dim}], got {rank}")
        g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
        g /= np.linalg.norm(g)
        return DensityMatrix(g @ g.conj().T, hbar, g)
    raise ValidationError(f"unknown state kind {kind!r}")


def random_qubit(seed, rank=2) -> DensityMatrix:
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(2, rank)) + 1j * rng.normal(size=(2, rank))
    g /= np.linalg.norm(g)
    return DensityMatrix(g @ g.conj().T, 1.0, g)


def bloch_vector(rho: DensityMatrix) -> np.ndarray:
    """``(tr(rho Sx), tr(rho Sy), tr(rho Sz))`` for a qubit state."""
    if rho.dim != 2:
        raise ValidationError(f"bloch_vector needs a qubit state, got dim {rho.dim}")
    return np.array([rho.expectation(PAULI[k]) for k in "xyz"])


def displace(rho: DensityMatrix, beta: complex, extra: int = 64, max_tail: float = 1e-8) -> DensityMatrix:
    """``D(beta) rho D(beta)^H`` computed in ``dim + extra`` levels and cropped back."""
    dim = rho.dim
    big = dim + extra
    a = annihilation(big)
    gen = -1j * (beta * a.conj().T - np.conj(beta) * a)  # Hermitian; D = exp(i gen)
    lam, u = np.linalg.eigh(gen)
    d_op = (u * np.exp(1j * lam)) @ u.conj().T
    b = np.zeros((big, rho.factor.shape[1]), dtype=complex)
    b[:dim] = rho.factor
    moved = d_op @ b
    tail = float(np.sum(np.abs(moved[dim:]) ** 2))
    if tail > max_tail:
        raise ValidationError(f"displaced state leaks {tail:.3e} beyond dim {dim}")
    kept = moved[:dim] / math.sqrt(1 - tail)
    return DensityMatrix(kept @ kept.conj().T, rho.hbar, kept)
