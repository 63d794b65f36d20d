"""Synthetic three-source, eight-variable multimode process with fault injection.

Samples follow ``x = A s + e`` with a fixed 8 x 3 mixing matrix.  The four
data sets differ only in the source distributions; data 3 reuses the
data 1 record.

Random streams: every block is drawn from its own PCG64 generator seeded
with ``SeedSequence(seed, spawn_key=(role, data_id))``.  Roles are
0 = training block, 1 = test block, 2 = normal block used to estimate a
new mode's scaler.  Sources are drawn column by column (s1, s2, s3), then
the noise matrix.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidData, SpecOutOfRange, UnknownDataId, UnknownScenario

MIXING = np.array(
    [
        [0.95, 0.82, 0.94],
        [0.23, 0.45, 0.92],
        [-0.61, 0.62, 0.41],
        [0.49, 0.79, 0.89],
        [0.89, -0.92, 0.06],
        [0.76, 0.74, 0.35],
        [0.46, 0.58, 0.81],
        [-0.02, 0.41, 0.01],
    ]
)
N_VARS = MIXING.shape[0]
NOISE_STD = 1e-3
BLOCK_SIZE = 1000

ROLE_TRAIN, ROLE_TEST, ROLE_NORMAL = 0, 1, 2


@dataclass(frozen=True)
class SourceSpec:
    """``uniform(a=lo, b=hi)`` or ``gaussian(a=mean, b=variance)``."""

    kind: str
    a: float
    b: float

    def __post_init__(self):
        if self.kind == "uniform":
            if not self.a < self.b:
                raise InvalidData(f"uniform source needs lo < hi, got [{self.a}, {self.b}]")
        elif self.kind == "gaussian":
            if not self.b > 0:
                raise InvalidData(f"gaussian source needs variance > 0, got {self.b}")
        else:
            raise InvalidData(f"unknown source kind {self.kind!r}")

    @property
    def mean(self):
        return 0.5 * (self.a + self.b) if self.kind == "uniform" else self.a

    @property
    def variance(self):
        return (self.b - self.a) ** 2 / 12.0 if self.kind == "uniform" else self.b

    def draw(self, rng, n):
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, n)
        return rng.normal(self.a, np.sqrt(self.b), n)


def uniform(lo, hi):
    return SourceSpec("uniform", lo, hi)


def gaussian(mean, var):
    return SourceSpec("gaussian", mean, var)


_DATA1 = (uniform(-10.0, -9.7), gaussian(-5.0, 1.0), uniform(2.0, 3.0))
DATA_SPECS = {
    1: _DATA1,
    2: (uniform(-6.0, -5.7), gaussian(-1.0, 1.0), uniform(3.0, 4.0)),
    3: _DATA1,
    4: (uniform(-9.0, -8.7), gaussian(-5.0, 1.0), uniform(3.0, 4.0)),
}


def block_rng(seed, role, data_id):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(role), int(data_id)))
    return np.random.Generator(np.random.PCG64(ss))


def source_mean(data_id):
    return np.array([s.mean for s in _specs(data_id)])


def _specs(data_id):
    try:
        return DATA_SPECS[int(data_id)]
    except (KeyError, ValueError, TypeError):
        raise UnknownDataId(f"unknown data id {data_id!r}; expected one of {sorted(DATA_SPECS)}") from None


def generate_block(data_id, n, seed, role=ROLE_TRAIN, noise_std=NOISE_STD, rng=None):
    """Draw ``n`` samples of data set ``data_id``.

    Pass ``rng`` to draw from an existing generator instead of the
    ``(seed, role, data_id)`` stream.
    """
    specs = _specs(data_id)
    n = int(n)
    if n < 1:
        raise InvalidData(f"n must be >= 1, got {n}")
    if rng is None:
        rng = block_rng(seed, role, data_id)
    S = np.column_stack([spec.draw(rng, n) for spec in specs])
    X = S @ MIXING.T
    if noise_std > 0:
        X = X + rng.normal(0.0, noise_std, size=X.shape)
    return X


@dataclass(frozen=True)
class FaultSpec:
    """Additive fault on one variable.

    ``variable_index`` and ``onset_sample`` are 1-based, so the default
    faults read like their textual description ("x3 from the 501st sample").
    A slope fault adds ``magnitude * (i - onset + 1)`` at 0-based row ``i``
    counted from the onset row.
    """

    kind: str
    variable_index: int
    onset_sample: int
    magnitude: float

    def __post_init__(self):
        if self.kind not in ("step", "slope"):
            raise SpecOutOfRange(f"fault kind must be 'step' or 'slope', got {self.kind!r}")

    @property
    def onset_row(self):
        return self.onset_sample - 1

    def check(self, n_samples, n_vars):
        if not 1 <= self.variable_index <= n_vars:
            raise SpecOutOfRange(f"variable_index {self.variable_index} outside 1..{n_vars}")
        if not 1 <= self.onset_sample <= n_samples:
            raise SpecOutOfRange(f"onset_sample {self.onset_sample} outside 1..{n_samples}")

    def to_dict(self):
        return {
            "kind": self.kind,
            "variable_index": self.variable_index,
            "onset_sample": self.onset_sample,
            "magnitude": self.magnitude,
        }


FAULTS = {
    1: FaultSpec("step", 3, 501, 0.1),
    2: FaultSpec("step", 6, 501, 0.1),
    3: FaultSpec("slope", 1, 501, 0.002),
}


def inject_fault(X, fault):
    """Return a faulty copy of ``X`` and the per-sample ground-truth labels."""
    X = np.array(X, dtype=float, copy=True)
    if X.ndim != 2:
        raise InvalidData(f"X must be 2-d, got shape {X.shape}")
    n, m = X.shape
    fault.check(n, m)
    r0, v = fault.onset_row, fault.variable_index - 1
    if fault.kind == "step":
        X[r0:, v] += fault.magnitude
    else:
        X[r0:, v] += fault.magnitude * np.arange(1, n - r0 + 1)
    labels = np.zeros(n, dtype=bool)
    labels[r0:] = True
    return X, labels


@dataclass(frozen=True)
class Situation:
    """One row of the simulation scheme.

    ``model`` is "A" (PCA on training data 1), "B" (PCA-EWC on training
    data 2 starting from A) or "C" (PCA on training data 2 alone).
    ``scaler_from`` says where the test standardization comes from: the
    model's own training block or a fresh normal block of the test mode.
    """

    situation_id: int
    model: str
    test_data: int
    scaler_from: str


SITUATIONS = {
    1: Situation(1, "A", 1, "train"),
    2: Situation(2, "B", 2, "train"),
    3: Situation(3, "B", 3, "normal"),
    4: Situation(4, "C", 3, "normal"),
    5: Situation(5, "B", 4, "normal"),
}


def get_situation(scenario):
    try:
        return SITUATIONS[int(scenario)]
    except (KeyError, ValueError, TypeError):
        raise UnknownScenario(f"unknown scenario {scenario!r}; expected one of {sorted(SITUATIONS)}") from None


@dataclass
class ScenarioData:
    situation: Situation
    fault: FaultSpec
    train: dict = field(default_factory=dict)
    test: np.ndarray = None
    labels: np.ndarray = None
    normal: np.ndarray = None


def scenario_dataset(scenario, fault, seed, n=BLOCK_SIZE, scaler_samples=BLOCK_SIZE, noise_std=NOISE_STD):
    """Training, normal and faulty test blocks for one situation.

    ``train`` maps the data id to its training block.  Situation 1 needs
    only training data 1; the others need training data 1 and 2 (Model C
    ignores data 1).  ``normal`` is set when the test mode is standardized
    with its own freshly estimated scaler.
    """
    sit = get_situation(scenario)
    out = ScenarioData(sit, fault)
    needed = (1,) if sit.model == "A" else (1, 2)
    for d in needed:
        out.train[d] = generate_block(d, n, seed, ROLE_TRAIN, noise_std)
    clean = generate_block(sit.test_data, n, seed, ROLE_TEST, noise_std)
    out.test, out.labels = inject_fault(clean, fault)
    if sit.scaler_from == "normal":
        out.normal = generate_block(sit.test_data, scaler_samples, seed, ROLE_NORMAL, noise_std)
    return out


def write_block_csv(path, X, labels=None, names=None):
    X = np.asarray(X, dtype=float)
    names = names or [f"x{j + 1}" for j in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + (["label"] if labels is not None else []))
        for i, row in enumerate(X.tolist()):
            vals = [repr(v) for v in row]
            if labels is not None:
                vals.append(int(bool(labels[i])))
            w.writerow(vals)


def read_block_csv(path):
    """Read a header-first numeric CSV; a column named ``label`` becomes the labels.

    Returns ``(X, labels_or_None, names)``.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidData(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise InvalidData(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise InvalidData(f"{path}: rows do not match the {len(header)}-column header")
    if "label" in header:
        j = header.index("label")
        labels = data[:, j].astype(bool)
        X = np.delete(data, j, axis=1)
        names = header[:j] + header[j + 1:]
        return X, labels, names
    return data, None, header
