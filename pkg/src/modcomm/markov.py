"""Quantum Markov chain diagnostics: CMI, Petz residual, trace of the
three-operator Golden-Thompson exponent and the relative-entropy identity.

All reductions are taken in the frame where A, B, C are contiguous (in that
order), which makes the identity padding of every reduced operator valid for
parity-even fermionic states as well as for qudits.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import xlogy

from . import dense
from .dense import DEFAULT_FLOOR, DensityOp, PureState, SiteLayout, hermitize
from .errors import ImplicationViolated
from .gaussian import MajoranaCovariance, block_diagonal, random_covariance, to_density

SUPPORT_TOL = 1e-12


def _as_dense(state):
    if isinstance(state, MajoranaCovariance):
        return to_density(state)
    if isinstance(state, PureState):
        return state.to_density()
    return state


@dataclass
class _Frame:
    rho: np.ndarray
    dims: tuple
    na: int
    nb: int
    nc: int

    def block(self, lo: int, hi: int) -> np.ndarray:
        """Reduced matrix on sites lo..hi-1 of the A+B+C frame."""
        d = self.dims
        dl = int(np.prod(d[:lo], dtype=int))
        dm = int(np.prod(d[lo:hi], dtype=int))
        dr = int(np.prod(d[hi:], dtype=int))
        t = self.rho.reshape(dl, dm, dr, dl, dm, dr)
        return hermitize(np.einsum("iajibj->ab", t))

    def embed(self, op: np.ndarray, lo: int, hi: int) -> np.ndarray:
        d = self.dims
        dl = int(np.prod(d[:lo], dtype=int))
        dr = int(np.prod(d[hi:], dtype=int))
        return np.kron(np.kron(np.eye(dl), op), np.eye(dr))


def _frame(state, a, b, c) -> _Frame:
    state = _as_dense(state)
    lay = state.layout
    a, b, c = lay.ordered(a), lay.ordered(b), lay.ordered(c)
    rho = dense.reduce(state, a + b + c)
    return _Frame(rho.matrix, rho.layout.dims, len(a), len(b), len(c))


def _log(m: np.ndarray, floor: float) -> tuple[np.ndarray, bool]:
    w, v = np.linalg.eigh(m)
    return (v * np.log(np.maximum(w, floor))) @ v.conj().T, bool(w.min() < floor)


def _logs(f: _Frame, floor: float):
    na, nb, nc = f.na, f.nb, f.nc
    n = na + nb + nc
    out, deficient = {}, False
    for key, (lo, hi) in {"AB": (0, na + nb), "BC": (na, n), "B": (na, na + nb),
                          "ABC": (0, n)}.items():
        lg, bad = _log(f.block(lo, hi), floor)
        out[key] = f.embed(lg, lo, hi)
        deficient |= bad
    return out, deficient


def _support_projector(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    p = v[:, w > SUPPORT_TOL]
    return p @ p.conj().T


def petz_residual(state, a, b, c, norm: str = "operator",
                  floor: float = DEFAULT_FLOOR) -> float:
    """Norm of (K_ABC - K_AB - K_BC + K_B) projected onto supp(rho_ABC)."""
    f = _frame(state, a, b, c)
    lg, _ = _logs(f, floor)
    delta = lg["AB"] + lg["BC"] - lg["B"] - lg["ABC"]
    p = _support_projector(f.rho)
    w = np.linalg.eigvalsh(hermitize(p @ delta @ p))
    if norm == "operator":
        return float(np.abs(w).max(initial=0))
    if norm == "trace":
        return float(np.abs(w).sum())
    raise ValueError(f"unknown norm {norm!r}")


@dataclass(frozen=True)
class GTResult:
    gt_trace: float
    rel_ent_identity_residual: float
    rank_deficient: bool


def gt_lieb_check(state, a, b, c, floor: float = DEFAULT_FLOOR) -> GTResult:
    """Tr exp(ln rho_AB + ln rho_BC - ln rho_B) and |I - D(rho||sigma) + ln Tr eta|."""
    f = _frame(state, a, b, c)
    lg, deficient = _logs(f, floor)
    exponent = hermitize(lg["AB"] + lg["BC"] - lg["B"])
    w, v = np.linalg.eigh(exponent)
    tr_eta = float(np.exp(w).sum())
    ln_sigma = exponent - np.log(tr_eta) * np.eye(exponent.shape[0])
    rho = f.rho
    p = np.clip(np.linalg.eigvalsh(rho), 0, None)
    rel = float(xlogy(p, p).sum() - np.einsum("ij,ji->", rho, ln_sigma).real)
    na, nb = f.na, f.nb
    n = na + nb + f.nc

    def s(lo, hi):
        e = np.clip(np.linalg.eigvalsh(f.block(lo, hi)), 0, None)
        return float(-xlogy(e, e).sum())

    i_acb = s(0, na + nb) + s(na, n) - s(na, na + nb) - s(0, n)
    return GTResult(tr_eta, float(abs(i_acb - rel + np.log(tr_eta))), deficient)


@dataclass(frozen=True)
class MarkovReport:
    cmi_value: float
    petz_residual: float
    gt_trace: float
    rel_ent_identity_residual: float
    j_value: float
    rank_deficient: bool = False
    statistics: str = "qudit"

    def to_dict(self) -> dict:
        d = asdict(self)
        keys = {"cmi_value": "cmiValue", "petz_residual": "petzResidual", "gt_trace": "gtTrace",
                "rel_ent_identity_residual": "relEntIdentityResidual", "j_value": "jValue",
                "rank_deficient": "rankDeficient"}
        return {keys.get(k, k): v for k, v in d.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def markov_suite(state, a, b, c, cmi_tol: float = 1e-10, j_tol: float = 1e-8,
                 floor: float = DEFAULT_FLOOR, strict: bool = True) -> MarkovReport:
    """Aggregate the Markov diagnostics and check cmi < cmi_tol => |J| < j_tol."""
    dstate = _as_dense(state)
    cmi = dense.cmi(dstate, a, b, c)
    j = dense.modular_commutator(dstate, a, b, c, floor)
    gt = gt_lieb_check(dstate, a, b, c, floor)
    report = MarkovReport(cmi, petz_residual(dstate, a, b, c, floor=floor), gt.gt_trace,
                          gt.rel_ent_identity_residual, j, gt.rank_deficient,
                          dstate.layout.statistics)
    if strict and cmi < cmi_tol and abs(j) >= j_tol:
        raise ImplicationViolated(f"cmi={cmi:.3e} < {cmi_tol:.0e} but |J|={abs(j):.3e}")
    return report


# --- positive controls -------------------------------------------------------

def random_markov_state(rng: np.random.Generator, sizes=(1, 1, 1, 1),
                        statistics: str = "qudit", shuffle: bool = True):
    """rho_{A B1} (x) rho_{B2 C}: exactly Markov for A-(B1 B2)-C.

    ``sizes`` are the site counts of A, B1, B2, C.  Returns the state and the
    site labels of A, B, C.  Fermionic states use even random blocks and, with
    ``shuffle``, a randomly permuted mode order.
    """
    na, nb1, nb2, nc = (int(v) for v in sizes)
    labels = list(range(na + nb1 + nb2 + nc))
    a = labels[:na]
    b = labels[na:na + nb1 + nb2]
    c = labels[na + nb1 + nb2:]
    fermionic = statistics == "fermionic"
    mk = SiteLayout.fermions if fermionic else SiteLayout.qubits
    r1 = dense.random_density(mk(na + nb1), rng, even=fermionic)
    r2 = dense.random_density(mk(nb2 + nc), rng, even=fermionic)
    rho = DensityOp(np.kron(r1.matrix, r2.matrix), mk(labels), validate=False)
    if fermionic and shuffle:
        from .fermion import reorder_state
        rho = reorder_state(rho, [int(v) for v in rng.permutation(labels)])
    elif shuffle:
        order = [int(v) for v in rng.permutation(labels)]
        rho = dense.partial_trace(rho, order)
    return rho, (a, b, c)


def random_gaussian_markov_state(rng: np.random.Generator, sizes=(1, 1, 1, 1)):
    na, nb1, nb2, nc = (int(v) for v in sizes)
    g1 = random_covariance(na + nb1, rng)
    g2 = random_covariance(nb2 + nc, rng)
    cov = block_diagonal(g1, g2)
    labels = list(range(na + nb1 + nb2 + nc))
    return cov, (labels[:na], labels[na:na + nb1 + nb2], labels[na + nb1 + nb2:])
