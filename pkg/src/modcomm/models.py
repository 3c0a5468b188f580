"""Test and demonstration states.

Free-fermion models are translation-invariant on a square lattice with
``n_orb`` orbitals per site.  They are described by displacement blocks
``d -> (T_d, D_d)``: the Hamiltonian contains ``a^dag_{R+d} T_d a_R`` and
``(1/2) a^dag_{R+d} D_d a^dag_R`` summed over R, d (Hermitian conjugates are
already included in the block list).

* ``chern-insulator``: two-band model with
  ``H(k) = sin kx sx + sin ky sy + (m + cos kx + cos ky) sz``;
  Chern number +1 for 0 < m < 2, -1 for -2 < m < 0, 0 for |m| > 2.
* ``trivial-insulator``: the same model with its mass outside the window.
* ``p-plus-ip``: spinless superconductor with
  ``xi = -2t(cos kx + cos ky) - mu`` and ``Delta(sin kx + i sin ky)``.

The Chern number is computed from the Majorana Bloch matrix ``i h(k)`` by
the plaquette (Fukui-Hatsugai-Suzuki) method.  For number-conserving models
it is twice the band Chern number; the expected chiral central charge is
half of it in every case.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import dense
from .dense import DensityOp, PureState, SiteLayout
from .errors import GaplessParameters
from .gaussian import MajoranaCovariance, QuadraticHam, nambu_to_majorana
from .lattice import Cell, cell_at, hex_cells, sector_of_point

FREE_FERMION_KINDS = ("chern-insulator", "trivial-insulator", "p-plus-ip")
KINDS = {
    "product": ("Random product state of n qubits.", {"n": 6}),
    "random-pure": ("Haar-like random pure state of n qubits.", {"n": 6, "real": False}),
    "random-markov": ("rho_{A B1} (x) rho_{B2 C}, exactly Markov for A-B-C.",
                      {"sizes": [1, 1, 1, 1], "statistics": "qudit"}),
    "ghz": ("GHZ state of n qubits.", {"n": 3}),
    "toric-code": ("Toric-code ground state in plaquette form on a 4x4 torus (16 qubits).",
                   {"size": 4}),
    "chern-insulator": ("Two-band Chern insulator, C = sign(m) for 0 < |m| < 2.",
                        {"mass": 1.0, "hopping": 1.0}),
    "trivial-insulator": ("Two-band insulator with mass outside the topological window.",
                          {"mass": 3.0, "hopping": 1.0}),
    "p-plus-ip": ("Spinless p+ip superconductor; weak pairing for 0 < |mu| < 4.",
                  {"mu": 2.0, "hopping": 1.0, "delta": 1.0}),
}
GAP_TOL = 1e-6
DEFAULT_GRANULARITY = 3.0


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: dict = field(default_factory=dict)
    extent: tuple = (24, 24)
    boundary: str = "periodic"
    granularity: float = DEFAULT_GRANULARITY
    seed: int = 0
    conjugate: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; known: {sorted(KINDS)}")
        if self.boundary not in ("open", "periodic"):
            raise ValueError("boundary must be open or periodic")
        merged = dict(KINDS[self.kind][1])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ValueError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged.update(self.params)
        object.__setattr__(self, "params", merged)
        object.__setattr__(self, "extent", tuple(int(v) for v in self.extent))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params, "extent": list(self.extent),
                "boundary": self.boundary, "granularity": self.granularity,
                "seed": self.seed, "conjugate": self.conjugate}

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


# --- free-fermion blocks -----------------------------------------------------

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.diag([1.0, -1.0]).astype(complex)


def _raw_blocks(spec: ModelSpec) -> dict:
    """Hopping and pairing per displacement, before adding conjugates."""
    p = spec.params
    if spec.kind in ("chern-insulator", "trivial-insulator"):
        t = p["hopping"]
        z = np.zeros((2, 2), complex)
        return {(0, 0): (p["mass"] * _SZ, z),
                (1, 0): (t * (_SZ + 1j * _SX) / 2, z),
                (0, 1): (t * (_SZ + 1j * _SY) / 2, z)}
    if spec.kind == "p-plus-ip":
        t, mu, dl = p["hopping"], p["mu"], p["delta"]
        one = np.ones((1, 1), complex)
        return {(0, 0): (-mu * one, 0 * one),
                (1, 0): (-t * one, dl * one),
                (0, 1): (-t * one, 1j * dl * one)}
    raise ValueError(f"{spec.kind} is not a free-fermion model")


def displacement_blocks(spec: ModelSpec) -> dict:
    """d -> (T_d, D_d) with (row - column) displacement d, conjugates included."""
    out: dict = {}
    for d, (t, dd) in _raw_blocks(spec).items():
        if spec.conjugate:
            t, dd = t.conj(), dd.conj()
        nd = (-d[0], -d[1])
        n = t.shape[0]
        for key in (d, nd):
            out.setdefault(key, [np.zeros((n, n), complex), np.zeros((n, n), complex)])
        out[d][0] += t
        if d != (0, 0):
            out[nd][0] += t.conj().T
        # pairing a^dag_R D a^dag_{R+d}
        out[nd][1] += dd
        out[d][1] += -dd.T
    return {k: (v[0], v[1]) for k, v in out.items()}


def n_orbitals(spec: ModelSpec) -> int:
    return next(iter(_raw_blocks(spec).values()))[0].shape[0]


def majorana_blocks(spec: ModelSpec) -> dict:
    n = n_orbitals(spec)
    w = nambu_to_majorana(n)
    out = {}
    for d, (t, dd) in displacement_blocks(spec).items():
        bdg = np.block([[t, dd], [-dd.conj(), -t.conj()]])
        out[d] = 2 * (w.conj().T @ bdg @ w).imag
    return out


def bloch_matrix(spec: ModelSpec, kx: float, ky: float) -> np.ndarray:
    """Hermitian i h(k) with h(k) = sum_d h_d exp(-i k.d)."""
    return 1j * sum(h * np.exp(-1j * (kx * d[0] + ky * d[1]))
                    for d, h in majorana_blocks(spec).items())


def _bloch_grid(spec: ModelSpec, nx: int, ny: int) -> np.ndarray:
    blocks = majorana_blocks(spec)
    kx = 2 * np.pi * np.arange(nx) / nx
    ky = 2 * np.pi * np.arange(ny) / ny
    m = next(iter(blocks.values())).shape[0]
    out = np.zeros((nx, ny, m, m), dtype=complex)
    for d, h in blocks.items():
        phase = np.exp(-1j * (kx[:, None] * d[0] + ky[None, :] * d[1]))
        out += 1j * phase[:, :, None, None] * h
    return out


def bulk_gap(spec: ModelSpec, nk: int = 64) -> float:
    w = np.linalg.eigvalsh(_bloch_grid(spec, nk, nk))
    return float(np.abs(w).min())


def _check_gap(spec: ModelSpec, nk: int = 64) -> None:
    gap = bulk_gap(spec, nk)
    if gap < GAP_TOL:
        raise GaplessParameters(f"bulk gap {gap:.2e} below {GAP_TOL:.0e} for {spec.kind}")


def majorana_chern_number(spec: ModelSpec, nk: int = 64) -> int:
    """Plaquette Chern number of the negative-energy bands of i h(k)."""
    _check_gap(spec, nk)
    grid = _bloch_grid(spec, nk, nk)
    w, v = np.linalg.eigh(grid)
    occ = v[..., : grid.shape[-1] // 2]

    def link(a, b):
        return np.linalg.det(np.einsum("...ji,...jk->...ik", a.conj(), b))

    b1 = np.roll(occ, -1, axis=0)
    b2 = np.roll(b1, -1, axis=1)
    b3 = np.roll(occ, -1, axis=1)
    flux = np.angle(link(occ, b1) * link(b1, b2) * link(b2, b3) * link(b3, occ))
    return int(round(flux.sum() / (2 * np.pi)))


def chern_number(spec: ModelSpec, nk: int = 64) -> int:
    """Band Chern number (number-conserving models) or BdG Chern number (p+ip)."""
    cm = majorana_chern_number(spec, nk)
    return cm // 2 if spec.kind in ("chern-insulator", "trivial-insulator") else cm


def expected_ccc(spec: ModelSpec, nk: int = 64) -> float:
    return majorana_chern_number(spec, nk) / 2


# --- real-space free fermions ------------------------------------------------

def site_positions(spec: ModelSpec) -> np.ndarray:
    lx, ly = spec.extent
    return np.array([(x, y) for x in range(lx) for y in range(ly)], dtype=float)


def mode_labels(spec: ModelSpec) -> list:
    lx, ly = spec.extent
    n = n_orbitals(spec)
    return [(x, y, o) for x in range(lx) for y in range(ly) for o in range(n)]


def real_space_ham(spec: ModelSpec) -> QuadraticHam:
    lx, ly = spec.extent
    n = n_orbitals(spec)
    nsites = lx * ly
    tm = np.zeros((n * nsites, n * nsites), complex)
    dm = np.zeros_like(tm)

    def idx(x, y):
        return (x * ly + y) * n

    periodic = spec.boundary == "periodic"
    for d, (t, dd) in displacement_blocks(spec).items():
        for x in range(lx):
            for y in range(ly):
                xs, ys = x + d[0], y + d[1]
                if periodic:
                    xs, ys = xs % lx, ys % ly
                elif not (0 <= xs < lx and 0 <= ys < ly):
                    continue
                r, c = idx(xs, ys), idx(x, y)
                tm[r:r + n, c:c + n] += t
                dm[r:r + n, c:c + n] += dd
    pos = np.repeat(site_positions(spec), n, axis=0)
    return QuadraticHam.from_bdg(tm, dm, mode_labels(spec), pos)


def bloch_covariance(spec: ModelSpec) -> MajoranaCovariance:
    """Ground-state covariance on the periodic lattice via the Bloch sign function."""
    if spec.boundary != "periodic":
        raise ValueError("the Bloch route needs periodic boundaries")
    lx, ly = spec.extent
    grid = _bloch_grid(spec, lx, ly)
    w, v = np.linalg.eigh(grid)
    if np.abs(w).min() < GAP_TOL:
        raise GaplessParameters("finite-size spectrum has a zero mode")
    sgn = np.einsum("...ij,...j,...kj->...ik", v, np.sign(w), v.conj())
    # Gamma_d = (i/N) sum_k sgn(i h(k)) exp(i k.d)
    gd = (1j * np.fft.ifft2(sgn, axes=(0, 1))).real
    m = gd.shape[-1]
    xs = np.arange(lx)
    ys = np.arange(ly)
    dx = (xs[:, None] - xs[None, :]) % lx
    dy = (ys[:, None] - ys[None, :]) % ly
    # full[x, y, :, x', y', :] = gd[x - x', y - y']
    full = gd[dx[:, None, :, None], dy[None, :, None, :]]  # (x, y, x', y', m, m)
    full = full.transpose(0, 1, 4, 2, 3, 5).reshape(lx * ly * m, lx * ly * m)
    pos = np.repeat(site_positions(spec), m // 2, axis=0)
    return MajoranaCovariance(full, mode_labels(spec), pos)


def ground_state(spec: ModelSpec) -> MajoranaCovariance:
    from .gaussian import ground_covariance
    _check_gap(spec)
    if spec.boundary == "periodic":
        return bloch_covariance(spec)
    return ground_covariance(real_space_ham(spec))


def default_center(spec: ModelSpec) -> tuple[float, float]:
    lx, ly = spec.extent
    return (lx / 2 - 0.5, ly / 2 - 0.5)


def disk_regions(cov: MajoranaCovariance, radius: float,
                 center: tuple[float, float] | None = None) -> dict[str, list]:
    """Modes within ``radius`` of ``center``, split into the three sectors."""
    if cov.positions is None:
        raise ValueError("covariance carries no mode positions")
    cx, cy = center if center is not None else _center_of(cov)
    regs: dict[str, list] = {"A": [], "B": [], "C": []}
    for mode, (x, y) in zip(cov.modes, cov.positions):
        dx, dy = x - cx, y - cy
        if dx * dx + dy * dy <= radius * radius:
            regs[sector_of_point(dx, dy)].append(mode)
    return regs


def _center_of(cov: MajoranaCovariance) -> tuple[float, float]:
    lo, hi = cov.positions.min(axis=0), cov.positions.max(axis=0)
    return ((lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2)


def supersites(cov: MajoranaCovariance, cells: frozenset, spacing: float,
               center: tuple[float, float] | None = None) -> dict[Cell, list]:
    """Group modes into coarse triangular-lattice cells of the given spacing."""
    cx, cy = center if center is not None else _center_of(cov)
    out: dict[Cell, list] = {c: [] for c in sorted(cells)}
    for mode, (x, y) in zip(cov.modes, cov.positions):
        c = cell_at(x - cx, y - cy, spacing)
        if c in out:
            out[c].append(mode)
    empty = [c for c, ms in out.items() if not ms]
    if empty:
        raise ValueError(f"coarse cells without microscopic sites: {empty[:3]}")
    return out


# --- qubit states ------------------------------------------------------------

def _rng(spec: ModelSpec) -> np.random.Generator:
    return np.random.default_rng(spec.seed)


def product_state(n: int, rng: np.random.Generator) -> PureState:
    psi = np.ones(1, dtype=complex)
    for _ in range(n):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi = np.kron(psi, v / np.linalg.norm(v))
    return PureState(psi, SiteLayout.qubits(n))


def ghz_state(n: int) -> PureState:
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = psi[-1] = 2 ** -0.5
    return PureState(psi, SiteLayout.qubits(n))


# --- toric code --------------------------------------------------------------

def gf2_rank(m: np.ndarray) -> int:
    m = np.array(m, dtype=np.uint8) % 2
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        piv = next((r for r in range(rank, rows) if m[r, c]), None)
        if piv is None:
            continue
        m[[rank, piv]] = m[[piv, rank]]
        for r in range(rows):
            if r != rank and m[r, c]:
                m[r] ^= m[rank]
        rank += 1
    return rank


def _commutes(u: np.ndarray, v: np.ndarray, n: int) -> bool:
    return (u[:n] @ v[n:] + u[n:] @ v[:n]) % 2 == 0


def toric_code_tableau(size: int = 4) -> np.ndarray:
    """Full stabilizer tableau (rows = [x | z]) of the plaquette-form toric code.

    Qubits sit on an ``size x size`` torus with index ``x * size + y``.  Each
    plaquette contributes X(x,y) Z(x+1,y) X(x+1,y+1) Z(x,y+1); the tableau is
    completed by commuting logical strings into a unique state.
    """
    if size % 2:
        raise ValueError("size must be even")
    n = size * size

    def q(x, y):
        return (x % size) * size + (y % size)

    rows = []
    for x in range(size):
        for y in range(size):
            v = np.zeros(2 * n, dtype=np.uint8)
            v[q(x, y)] = v[q(x + 1, y + 1)] = 1
            v[n + q(x + 1, y)] = v[n + q(x, y + 1)] = 1
            rows.append(v)
    gens = [r for r in rows]
    cands = []
    for y in range(size):
        v = np.zeros(2 * n, dtype=np.uint8)
        for x in range(size):
            v[q(x, y) + (0 if x % 2 == 0 else n)] = 1
        cands.append(v)
    for x in range(size):
        v = np.zeros(2 * n, dtype=np.uint8)
        for y in range(size):
            v[q(x, y) + (n if y % 2 == 0 else 0)] = 1
        cands.append(v)
    for v in cands:
        if all(_commutes(v, g, n) for g in gens) and \
                gf2_rank(np.vstack(gens + [v])) > gf2_rank(np.vstack(gens)):
            gens.append(v)
    tab = np.vstack(gens)
    if gf2_rank(tab) != n:
        raise RuntimeError("stabilizer tableau is incomplete")
    return tab


def stabilizer_entropy(tableau: np.ndarray, region) -> float:
    """S_A = (rank of the tableau restricted to A - |A|) ln 2."""
    n = tableau.shape[1] // 2
    cols = list(region) + [n + r for r in region]
    return (gf2_rank(tableau[:, cols]) - len(list(region))) * np.log(2)


def stabilizer_state(tableau: np.ndarray, rng: np.random.Generator) -> PureState:
    """Dense +1 eigenstate of every row, by projecting a random vector."""
    n = tableau.shape[1] // 2
    d = 2 ** n
    idx = np.arange(d)
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    # qubit 0 is the most significant bit
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
    weights = 1 << np.arange(n - 1, -1, -1)
    for row in tableau:
        xs, zs = row[:n].astype(int), row[n:].astype(int)
        xmask = int(xs @ weights)
        zsign = 1 - 2 * ((bits @ zs) % 2)
        # P = i^{|x&z|} X^x Z^z, so P|b> = i^{|x&z|} (-1)^{z.b} |b ^ x>
        phase = (1j ** int(xs @ zs)) * zsign
        applied = np.zeros_like(psi)
        applied[idx ^ xmask] = phase * psi
        psi = (psi + applied) / 2
        norm = np.linalg.norm(psi)
        if norm < 1e-8:
            raise RuntimeError("projection annihilated the start vector")
    return PureState(psi / np.linalg.norm(psi), SiteLayout.qubits(n))


def toric_code_regions(size: int = 4, block: int = 3) -> dict[str, list]:
    """Three sectors of a ``block x block`` patch about its central qubit."""
    c = (block - 1) / 2
    regs: dict[str, list] = {"A": [], "B": [], "C": []}
    for x in range(block):
        for y in range(block):
            regs[sector_of_point(x - c, y - c)].append(x * size + y)
    return regs


# --- build -------------------------------------------------------------------

def build(spec: ModelSpec) -> Any:
    """Ground state (or state) in the cheapest adequate representation."""
    p = spec.params
    rng = _rng(spec)
    if spec.kind == "product":
        state = product_state(int(p["n"]), rng)
    elif spec.kind == "random-pure":
        state = dense.random_pure_state(SiteLayout.qubits(int(p["n"])), rng, real=bool(p["real"]))
    elif spec.kind == "ghz":
        state = ghz_state(int(p["n"]))
    elif spec.kind == "random-markov":
        from .markov import random_markov_state
        state, _ = random_markov_state(rng, tuple(p["sizes"]), p["statistics"], shuffle=False)
    elif spec.kind == "toric-code":
        state = stabilizer_state(toric_code_tableau(int(p["size"])), rng)
    else:
        _check_gap(spec)
        return real_space_ham(spec)
    if spec.conjugate:
        state = dense.conjugate(state)
    return state


def default_regions(spec: ModelSpec) -> dict[str, list]:
    """The natural A/B/C (and D when nonempty) split for each state family."""
    p = spec.params
    if spec.kind == "random-markov":
        na, nb1, nb2, nc = (int(v) for v in p["sizes"])
        lab = list(range(na + nb1 + nb2 + nc))
        return {"A": lab[:na], "B": lab[na:na + nb1 + nb2], "C": lab[na + nb1 + nb2:]}
    if spec.kind == "toric-code":
        regs = toric_code_regions(int(p["size"]))
        used = {q for v in regs.values() for q in v}
        regs["D"] = [q for q in range(int(p["size"]) ** 2) if q not in used]
        return regs
    if spec.kind in KINDS and spec.kind not in FREE_FERMION_KINDS:
        n = int(p["n"])
        third = max(1, n // 3)
        regs = {"A": list(range(third)), "B": list(range(third, 2 * third)),
                "C": list(range(2 * third, min(n, 3 * third)))}
        if 3 * third < n:
            regs["D"] = list(range(3 * third, n))
        return regs
    raise ValueError("free-fermion regions depend on a disk radius; use disk_regions")


def with_params(spec: ModelSpec, **params) -> ModelSpec:
    return replace(spec, params={**spec.params, **params})
