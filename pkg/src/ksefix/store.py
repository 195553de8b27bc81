"""Verification, deduplication, classification and persistence of equilibria.

A candidate is admitted when its relative residual over the unit-time flow
is below 1e-10. Duplicates are detected by the translation-invariant
fingerprint |coeffs|: periodic translation only rotates coefficient phases,
so two translates of the same solution share the magnitude spectrum.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import SimState, cached_tables, flow_map
from .spectral import (GridSpec, LEADING_NAMES, idft2, leading_coefficients,
                       read_spectral, write_spectral)

VERIFY_HORIZON = 1.0
VERIFY_TOL = 1e-10
DEDUP_TOL = 1e-6
SYMMETRY_TOL = 1e-6
TABLE_AMBIGUITY = 0.05


class StoreError(RuntimeError):
    """Raised on ingest problems: missing files, residual regressions."""


@dataclass
class FixedPointRecord:
    id: int
    spec: np.ndarray
    relative_residual: float
    leading: np.ndarray
    symmetry: dict
    provenance: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return f"E{self.id}"


def verify(spec: np.ndarray, grid: GridSpec, dt: float = 0.05,
           horizon: float = VERIFY_HORIZON) -> float:
    """Relative residual ||Phi^T(u) - u|| / max(||u||, 1e-30)."""
    tables = cached_tables(grid, dt)
    evolved = flow_map(SimState(spec=spec, time=0.0), horizon, tables)
    return float(np.linalg.norm(evolved.spec - spec)
                 / max(np.linalg.norm(spec), 1e-30))


def fingerprint_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Relative Euclidean distance between magnitude spectra."""
    fa = np.abs(a).ravel()
    fb = np.abs(b).ravel()
    scale = max(np.linalg.norm(fa), np.linalg.norm(fb))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(fa - fb) / scale)


def classify_symmetry(spec: np.ndarray, tol: float = SYMMETRY_TOL) -> dict:
    """Reflection symmetries of the physical field, modulo translations.

    Each flag is true when some lattice-aligned reflection axis (x, y, or
    the diagonal) maps the field onto itself within ``tol`` of its norm;
    all n candidate axis positions are scanned.
    """
    phi = idft2(spec)
    n = phi.shape[0]
    norm = np.linalg.norm(phi)
    bound = tol * max(norm, 1e-300)

    def matches(candidates):
        return any(np.linalg.norm(phi - cand) <= bound for cand in candidates)

    flipped_x = phi[::-1, :]
    x_ref = matches(np.roll(flipped_x, s + 1, axis=0) for s in range(n))
    flipped_y = phi[:, ::-1]
    y_ref = matches(np.roll(flipped_y, s + 1, axis=1) for s in range(n))
    transposed = phi.T
    diag = matches(np.roll(transposed, (-c, c), axis=(0, 1)) for c in range(n))
    return {"x_reflection": x_ref, "y_reflection": y_ref, "diagonal": diag}


class FixedPointStore:
    """Collection of verified equilibria with persistence to a directory."""

    def __init__(self, grid: GridSpec, dt: float = 0.05,
                 tolerance: float = VERIFY_TOL, dedup_tol: float = DEDUP_TOL):
        self.grid = grid
        self.dt = dt
        self.tolerance = tolerance
        self.dedup_tol = dedup_tol
        self.records: list[FixedPointRecord] = []

    def __len__(self):
        return len(self.records)

    def verify(self, spec: np.ndarray) -> float:
        return verify(spec, self.grid, self.dt)

    def dedup(self, candidate: np.ndarray):
        """Return 'new' or the existing record the candidate duplicates."""
        for record in self.records:
            if fingerprint_distance(candidate, record.spec) <= self.dedup_tol:
                return record
        return None

    def admit(self, spec: np.ndarray, provenance=None):
        """Verify, deduplicate and append; returns (record, status).

        status is 'new', 'duplicate' (record is the existing twin) or
        'rejected' (record is None) when verification fails.
        """
        residual = self.verify(spec)
        if residual > self.tolerance:
            return None, "rejected"
        twin = self.dedup(spec)
        if twin is not None:
            return twin, "duplicate"
        record = FixedPointRecord(
            id=len(self.records) + 1,
            spec=np.array(spec, dtype=np.complex128),
            relative_residual=residual,
            leading=leading_coefficients(spec),
            symmetry=classify_symmetry(spec),
            provenance=dict(provenance or {}))
        self.records.append(record)
        return record, "new"

    # -- persistence -----------------------------------------------------

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        lines = [f"#store n={self.grid.n} half_domain={self.grid.half_domain!r}\n"]
        for rec in self.records:
            fname = f"{rec.label}.kse2"
            write_spectral(directory / fname, rec.spec, self.grid)
            prov = rec.provenance
            sym = "".join(flag for flag, on in
                          (("x", rec.symmetry["x_reflection"]),
                           ("y", rec.symmetry["y_reflection"]),
                           ("d", rec.symmetry["diagonal"])) if on) or "-"
            leading = ",".join(f"{v:.12g}" for v in rec.leading)
            lines.append(
                f"id={rec.id} file={fname} residual={rec.relative_residual:.6e} "
                f"symmetry={sym} method={prov.get('method', '?')} "
                f"seed={prov.get('seed', '?')} episode={prov.get('episode', '?')} "
                f"newton_iterations={prov.get('newton_iterations', '?')} "
                f"leading={leading}\n")
        with open(directory / "manifest.txt", "w") as fh:
            fh.writelines(lines)

    @classmethod
    def load(cls, directory, dt: float = 0.05,
             tolerance: float = VERIFY_TOL) -> "FixedPointStore":
        """Re-read a store; every record is re-verified on ingest."""
        directory = Path(directory)
        manifest = directory / "manifest.txt"
        if not manifest.exists():
            raise StoreError(f"no manifest in {directory}")
        store = None
        with open(manifest) as fh:
            for line in fh:
                line = line.strip()
                if line.startswith("#store "):
                    meta = dict(item.split("=", 1) for item in line[7:].split())
                    grid = GridSpec(n=int(meta["n"]),
                                    half_domain=float(meta["half_domain"]))
                    store = cls(grid, dt=dt, tolerance=tolerance)
                    continue
                if not line or line.startswith("#"):
                    continue
                fields = dict(item.split("=", 1) for item in line.split())
                rec_id = int(fields["id"])
                path = directory / fields["file"]
                if not path.exists():
                    raise StoreError(f"record E{rec_id}: missing field file {path.name}")
                spec, grid = read_spectral(path)
                if store is None:  # legacy manifest without a header line
                    store = cls(grid, dt=dt, tolerance=tolerance)
                residual = store.verify(spec)
                if residual > store.tolerance:
                    raise StoreError(
                        f"record E{rec_id}: residual regression "
                        f"{residual:.3e} > {store.tolerance:.1e} on ingest")
                leading = leading_coefficients(spec)
                stored = np.array([float(v) for v in fields["leading"].split(",")])
                if np.max(np.abs(leading - stored)) > 1e-9 * max(1.0, stored.max()):
                    raise StoreError(f"record E{rec_id}: leading coefficients "
                                     "disagree with manifest")
                sym = fields.get("symmetry", "-")
                record = FixedPointRecord(
                    id=rec_id, spec=spec, relative_residual=residual,
                    leading=leading,
                    symmetry={"x_reflection": "x" in sym,
                              "y_reflection": "y" in sym,
                              "diagonal": "d" in sym},
                    provenance={"method": fields.get("method", "?"),
                                "seed": fields.get("seed", "?"),
                                "episode": fields.get("episode", "?"),
                                "newton_iterations": fields.get("newton_iterations", "?")})
                store.records.append(record)
        if store is None:
            raise StoreError(f"manifest in {directory} has no header and no records")
        return store

    # -- exports -----------------------------------------------------------

    def export_table(self, path):
        """Table of leading magnitudes, one decimal place, sorted by
        (e01, e11, e10); near-coincident rows carry the extended columns."""
        order = sorted(range(len(self.records)),
                       key=lambda i: tuple(self.records[i].leading[:3]))
        first3 = [self.records[i].leading[:3] for i in order]
        ambiguous = []
        for a in range(len(order)):
            flag = any(b != a and np.max(np.abs(first3[a] - first3[b])) <= TABLE_AMBIGUITY
                       for b in range(len(order)))
            ambiguous.append(flag)
        with open(path, "w") as fh:
            fh.write("id," + ",".join(LEADING_NAMES) + "\n")
            for row, i in enumerate(order):
                rec = self.records[i]
                cells = [f"{v:.1f}" for v in rec.leading[:3]]
                if ambiguous[row]:
                    cells += [f"{v:.1f}" for v in rec.leading[3:]]
                else:
                    cells += [""] * (len(LEADING_NAMES) - 3)
                fh.write(f"E{row + 1}," + ",".join(cells) + "\n")

    def export_pgm(self, record: FixedPointRecord, path, tile: bool = False):
        """Physical-space graymap; tile=True renders the 2x2 extended domain."""
        phi = idft2(record.spec)
        if tile:
            phi = np.block([[phi, phi], [phi, phi]])
        lo, hi = phi.min(), phi.max()
        scale = 255.0 / (hi - lo) if hi > lo else 0.0
        gray = np.round((phi - lo) * scale).astype(np.uint8)
        with open(path, "wb") as fh:
            fh.write(b"P5\n%d %d\n255\n" % (gray.shape[1], gray.shape[0]))
            fh.write(gray.tobytes())
