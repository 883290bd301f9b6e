"""Real symmetric SDP container, Hermitian realification and text fixtures."""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

SENSES = ("=", "<=", ">=")


@dataclass
class Constraint:
    """``sum_k <coeffs[k], X_k>  (sense)  rhs``."""

    coeffs: dict[int, np.ndarray]
    sense: str
    rhs: float
    name: str = ""

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"unknown sense {self.sense!r}")
        self.coeffs = {int(k): np.asarray(v, dtype=float) for k, v in self.coeffs.items()}
        self.rhs = float(self.rhs)

    def value(self, blocks: list[np.ndarray]) -> float:
        return float(sum(np.sum(a * blocks[k]) for k, a in self.coeffs.items()))

    def violation(self, blocks: list[np.ndarray]) -> float:
        lhs = self.value(blocks)
        if self.sense == "=":
            return abs(lhs - self.rhs)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        return max(0.0, self.rhs - lhs)


@dataclass(frozen=True)
class VarView:
    """A named window into one block.

    ``kind == "hermitian"`` means the block is the realification of a complex
    Hermitian matrix of half the size; rows/cols then index the complex matrix.
    A ``vector`` view is returned as a 1-D array.
    """

    block: int
    kind: str
    rows: tuple[int, int]
    cols: tuple[int, int]
    vector: bool = False


@dataclass
class SdpProblem:
    """maximize ``sum_k <objective[k], X_k> + offset`` over PSD blocks ``X_k``."""

    blocks: list[int]
    objective: dict[int, np.ndarray] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    var_map: dict[str, VarView] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        self.blocks = [int(n) for n in self.blocks]
        self.objective = {int(k): np.asarray(v, dtype=float) for k, v in self.objective.items()}
        self.validate()

    def validate(self):
        if any(n < 1 for n in self.blocks):
            raise ValueError("block dimensions must be >= 1")
        mats = [self.objective] + [c.coeffs for c in self.constraints]
        for coeffs in mats:
            for k, a in coeffs.items():
                if not 0 <= k < len(self.blocks):
                    raise ValueError(f"block index {k} out of range")
                n = self.blocks[k]
                if a.shape != (n, n):
                    raise ValueError(f"coefficient for block {k} has shape {a.shape}, expected {(n, n)}")
                if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
                    raise ValueError(f"coefficient for block {k} is not symmetric")

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def add(self, coeffs: dict[int, np.ndarray], sense: str, rhs: float, name: str = "") -> Constraint:
        c = Constraint(coeffs, sense, rhs, name)
        self.constraints.append(c)
        return c

    def objective_value(self, blocks: list[np.ndarray]) -> float:
        return self.offset + float(sum(np.sum(c * blocks[k]) for k, c in self.objective.items()))

    def extract(self, blocks: list[np.ndarray], name: str) -> np.ndarray:
        view = self.var_map[name]
        X = blocks[view.block]
        if view.kind == "hermitian":
            X = complexify(X)
        out = X[view.rows[0]:view.rows[1], view.cols[0]:view.cols[1]]
        return out[:, 0] if view.vector else out


# -- realification -----------------------------------------------------------

def realify_matrix(H: np.ndarray) -> np.ndarray:
    """``H -> [[Re H, -Im H], [Im H, Re H]]``."""
    H = np.asarray(H)
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def complexify(X: np.ndarray) -> np.ndarray:
    """Hermitian matrix closest to a realified block (averages the two copies)."""
    n = X.shape[0] // 2
    re_ = 0.5 * (X[:n, :n] + X[n:, n:])
    im_ = 0.5 * (X[n:, :n] - X[:n, n:])
    H = re_ + 1j * im_
    return 0.5 * (H + H.conj().T)


def is_hermitian(H: np.ndarray, tol: float = 1e-12) -> bool:
    H = np.asarray(H)
    scale = max(1.0, float(np.abs(H).max(initial=0.0)))
    return H.ndim == 2 and H.shape[0] == H.shape[1] and np.allclose(H, H.conj().T, rtol=0, atol=tol * scale)


@dataclass
class HermitianConstraint:
    coeffs: dict[int, np.ndarray]
    sense: str
    rhs: float
    name: str = ""


def realify(blocks: list[tuple[int, bool]], objective: dict[int, np.ndarray],
            constraints: list[HermitianConstraint], var_map: dict[str, VarView] | None = None,
            offset: float = 0.0) -> SdpProblem:
    """Map a program over Hermitian (and real symmetric) PSD blocks to a real SDP.

    ``blocks`` lists ``(n, is_complex)``.  A complex block of order n becomes a
    real block of order 2n, and each Hermitian coefficient ``A`` becomes
    ``realify_matrix(A) / 2`` so that ``tr(A H) = tr(A' realify(H))``.
    """
    sizes = [2 * n if cplx else n for n, cplx in blocks]

    def convert(coeffs):
        out = {}
        for k, a in coeffs.items():
            n, cplx = blocks[k]
            a = np.asarray(a)
            if a.shape != (n, n):
                raise ValueError(f"coefficient for block {k} has shape {a.shape}, expected {(n, n)}")
            if not is_hermitian(a):
                raise ValueError(f"coefficient for block {k} is not Hermitian")
            if cplx:
                out[k] = 0.5 * realify_matrix(a)
            else:
                if np.iscomplexobj(a) and np.abs(a.imag).max(initial=0) > 0:
                    raise ValueError(f"complex coefficient on real block {k}")
                out[k] = np.real(a)
        return out

    prob = SdpProblem(sizes, convert(objective), [], dict(var_map or {}), offset)
    for c in constraints:
        prob.add(convert(c.coeffs), c.sense, c.rhs, c.name)
    return prob


# -- plain-text fixtures -----------------------------------------------------

def _write_matrix(buf, k, a):
    buf.write(f"block {k}\n")
    for row in a:
        buf.write(" ".join(repr(float(x)) for x in row) + "\n")


def dump_problem(p: SdpProblem) -> str:
    buf = io.StringIO()
    buf.write("blocks " + " ".join(str(n) for n in p.blocks) + "\n")
    buf.write(f"offset {float(p.offset)!r}\n")
    buf.write(f"objective {len(p.objective)}\n")
    for k, a in sorted(p.objective.items()):
        _write_matrix(buf, k, a)
    buf.write(f"constraints {len(p.constraints)}\n")
    for c in p.constraints:
        buf.write(f"constraint {c.sense} {c.rhs!r} {len(c.coeffs)} {c.name or '-'}\n")
        for k, a in sorted(c.coeffs.items()):
            _write_matrix(buf, k, a)
    for name, v in p.var_map.items():
        buf.write(f"var {name} {v.block} {v.kind} {v.rows[0]} {v.rows[1]} {v.cols[0]} {v.cols[1]}"
                  f" {'vector' if v.vector else 'matrix'}\n")
    return buf.getvalue()


def load_problem(text: str) -> SdpProblem:
    lines = iter(text.splitlines())

    def read_block(sizes):
        tag, k = next(lines).split()
        assert tag == "block"
        k = int(k)
        rows = [np.array(next(lines).split(), dtype=float) for _ in range(sizes[k])]
        return k, np.vstack(rows)

    head = next(lines).split()
    if head[0] != "blocks":
        raise ValueError("expected 'blocks' header")
    sizes = [int(x) for x in head[1:]]
    offset = float(next(lines).split()[1])
    n_obj = int(next(lines).split()[1])
    objective = dict(read_block(sizes) for _ in range(n_obj))
    n_con = int(next(lines).split()[1])
    prob = SdpProblem(sizes, objective, [], {}, offset)
    for _ in range(n_con):
        _, sense, rhs, nb, name = next(lines).split()
        coeffs = dict(read_block(sizes) for _ in range(int(nb)))
        prob.add(coeffs, sense, float(rhs), "" if name == "-" else name)
    for line in lines:
        if not line.strip():
            continue
        _, name, blk, kind, r0, r1, c0, c1, shape = line.split()
        prob.var_map[name] = VarView(int(blk), kind, (int(r0), int(r1)), (int(c0), int(c1)),
                                     shape == "vector")
    return prob
