"""
Deterministic generators for the experiment model families: periodic 2D torus,
periodic 3D cube, bipartite RBM and the chimera lattice of K_{4,4} cells.

Coupling and field specs are strings:
    "const:<c>"   every value equals c (e.g. "const:1", "const:0")
    "pm1"         uniform on {-1, +1}
    "gauss:<s>"   normal with standard deviation s
Random draws come from one numpy Generator seeded once per model: couplings are
drawn first in edge-generation order, then fields in spin order.
"""
from dataclasses import dataclass

import numpy as np

from errors import InvalidParameterError, ModelFormatError
from ising_model import IsingModel
from logger_config import logger


@dataclass(frozen=True)
class ValueSpec:
    kind: str
    value: float = 1.0

    @classmethod
    def parse(cls, text):
        if isinstance(text, ValueSpec):
            return text
        if isinstance(text, (int, float)):
            return cls("const", float(text))
        text = str(text).strip().lower()
        if text == "pm1":
            return cls("pm1")
        head, _, tail = text.partition(":")
        if head in ("const", "gauss") and tail:
            try:
                return cls(head, float(tail))
            except ValueError:
                pass
        raise InvalidParameterError(f"unrecognized value spec '{text}' (const:<c> | pm1 | gauss:<s>)")

    def draw(self, rng, count):
        if self.kind == "const":
            return np.full(count, self.value)
        if self.kind == "pm1":
            return np.where(rng.random(count) < 0.5, -1.0, 1.0)
        return rng.normal(0.0, self.value, size=count)

    def __str__(self):
        return "pm1" if self.kind == "pm1" else f"{self.kind}:{self.value:g}"


def _finish(num_spins, pairs, coupling_spec, field_spec, seed, beta, name, bipartition=None):
    rng = np.random.default_rng(seed)
    couplings = ValueSpec.parse(coupling_spec).draw(rng, len(pairs))
    fields = ValueSpec.parse(field_spec).draw(rng, num_spins)
    edges = [(i, j, c) for (i, j), c in zip(pairs, couplings)]
    model = IsingModel(num_spins, edges, fields, beta=beta, bipartition=bipartition, name=name)
    logger.debug(f"Generated {model}")
    return model


def make_torus_2d(side, coupling_spec="const:1", field_spec="const:0", seed=0, beta=1.0):
    """L x L grid with periodic boundaries; spin (r, c) has index r*L + c."""
    if side < 3:
        raise InvalidParameterError(f"torus side must be >= 3, got {side}")
    pairs = []
    for r in range(side):
        for c in range(side):
            i = r * side + c
            pairs.append((i, r * side + (c + 1) % side))
            pairs.append((i, ((r + 1) % side) * side + c))
    return _finish(side * side, pairs, coupling_spec, field_spec, seed, beta, f"torus{side}x{side}")


def make_cube_3d(side, coupling_spec="pm1", field_spec="const:0", seed=0, beta=1.0):
    """L x L x L cube with periodic boundaries; spin (x, y, z) has index (x*L + y)*L + z."""
    if side < 3:
        raise InvalidParameterError(f"cube side must be >= 3, got {side}")

    def index(x, y, z):
        return ((x % side) * side + (y % side)) * side + (z % side)

    pairs = []
    for x in range(side):
        for y in range(side):
            for z in range(side):
                i = index(x, y, z)
                pairs.append((i, index(x + 1, y, z)))
                pairs.append((i, index(x, y + 1, z)))
                pairs.append((i, index(x, y, z + 1)))
    return _finish(side ** 3, pairs, coupling_spec, field_spec, seed, beta, f"cube{side}")


def rbm_to_ising(weights, visible_bias, hidden_bias):
    """
    Converts {0,1} RBM parameters, E(v,h) = -v'Wh - b'v - c'h, into the +-1 form.
    With v = (s+1)/2 and h = (t+1)/2:
        J_vh = W_vh / 4
        h_v  = b_v / 2 + sum_h W_vh / 4
        h_h  = c_h / 2 + sum_v W_vh / 4
    and the constant offset is dropped.
    """
    weights = np.asarray(weights, dtype=np.float64)
    n_visible, n_hidden = weights.shape
    visible_bias = np.asarray(visible_bias, dtype=np.float64)
    hidden_bias = np.asarray(hidden_bias, dtype=np.float64)
    if visible_bias.shape != (n_visible,) or hidden_bias.shape != (n_hidden,):
        raise ModelFormatError(
            f"bias shapes {visible_bias.shape}/{hidden_bias.shape} do not match W {weights.shape}")
    couplings = weights / 4.0
    fields = np.concatenate([visible_bias / 2.0 + weights.sum(axis=1) / 4.0,
                             hidden_bias / 2.0 + weights.sum(axis=0) / 4.0])
    return couplings, fields


def load_rbm_weights(path):
    """Reads an .npz archive holding W (n_v x n_h), vbias and hbias in {0,1} convention."""
    try:
        with np.load(path) as archive:
            weights, vbias, hbias = archive["W"], archive["vbias"], archive["hbias"]
    except KeyError as e:
        raise ModelFormatError(f"{path}: missing array {e}") from e
    except (OSError, ValueError) as e:
        raise ModelFormatError(f"{path}: cannot read RBM weights ({e})") from e
    if weights.ndim != 2:
        raise ModelFormatError(f"{path}: W must be 2-dimensional, got shape {weights.shape}")
    return weights, vbias, hbias


def make_bipartite_rbm(n_visible, n_hidden, weight_source="gauss:0.1", seed=0, beta=1.0):
    """
    Complete bipartite model; spins 0..n_visible-1 are the visible layer.
    weight_source is "gauss:<scale>" (couplings and fields drawn directly in the
    +-1 form) or a path to an .npz file in {0,1} convention.
    """
    if n_visible < 1 or n_hidden < 1:
        raise InvalidParameterError(f"layer sizes must be >= 1, got {n_visible}x{n_hidden}")
    num_spins = n_visible + n_hidden
    pairs = [(v, n_visible + h) for v in range(n_visible) for h in range(n_hidden)]

    source = str(weight_source)
    if source.lower().startswith("gauss:"):
        scale = ValueSpec.parse(source).value
        return _finish(num_spins, pairs, f"gauss:{scale}", f"gauss:{scale}", seed, beta,
                       f"rbm{n_visible}x{n_hidden}", bipartition=n_visible)

    weights, vbias, hbias = load_rbm_weights(source)
    if weights.shape != (n_visible, n_hidden):
        raise ModelFormatError(f"{source}: W has shape {weights.shape}, expected ({n_visible}, {n_hidden})")
    couplings, fields = rbm_to_ising(weights, vbias, hbias)
    edges = [(i, j, couplings[i, j - n_visible]) for i, j in pairs]
    return IsingModel(num_spins, edges, fields, beta=beta, bipartition=n_visible,
                      name=f"rbm{n_visible}x{n_hidden}")


def make_chimera(rows, cols, coupling_spec="pm1", field_spec="const:0", seed=0, beta=1.0):
    """
    Grid of K_{4,4} cells, open boundaries. Cell (r, c) owns spins
    8*(r*cols + c) + k: k = 0..3 is the left half, k = 4..7 the right half.
    Inside a cell every left spin couples to every right spin; horizontally
    adjacent cells couple matching right-half spins, vertically adjacent cells
    couple matching left-half spins.
    """
    if rows < 1 or cols < 1:
        raise InvalidParameterError(f"chimera grid must be at least 1x1, got {rows}x{cols}")

    def base(r, c):
        return 8 * (r * cols + c)

    pairs = []
    for r in range(rows):
        for c in range(cols):
            b = base(r, c)
            pairs.extend((b + left, b + 4 + right) for left in range(4) for right in range(4))
            if c + 1 < cols:
                pairs.extend((b + 4 + k, base(r, c + 1) + 4 + k) for k in range(4))
            if r + 1 < rows:
                pairs.extend((b + k, base(r + 1, c) + k) for k in range(4))
    return _finish(8 * rows * cols, pairs, coupling_spec, field_spec, seed, beta, f"chimera{rows}x{cols}")


def make_random_graph(num_spins, edge_prob=0.5, coupling_spec="gauss:1", field_spec="gauss:0.5", seed=0, beta=1.0):
    """Erdos-Renyi couplings; the small frustrated models of the exact checks."""
    if not 0.0 <= edge_prob <= 1.0:
        raise InvalidParameterError(f"edge_prob must be in [0, 1], got {edge_prob}")
    # Structure draws use a stream separate from the couplings and fields.
    rng = np.random.default_rng((seed, 1))
    pairs = [(i, j) for i in range(num_spins) for j in range(i + 1, num_spins) if rng.random() < edge_prob]
    return _finish(num_spins, pairs, coupling_spec, field_spec, seed, beta, f"random{num_spins}")


GENERATORS = {
    "torus_2d": lambda p: make_torus_2d(p["size"], p.get("couplings", "const:1"), p.get("fields", "const:0"),
                                        p.get("seed", 0), p.get("beta", 1.0)),
    "cube_3d": lambda p: make_cube_3d(p["size"], p.get("couplings", "pm1"), p.get("fields", "const:0"),
                                      p.get("seed", 0), p.get("beta", 1.0)),
    "rbm": lambda p: make_bipartite_rbm(p["n_visible"], p["n_hidden"], p.get("weights", "gauss:0.1"),
                                        p.get("seed", 0), p.get("beta", 1.0)),
    "chimera": lambda p: make_chimera(p.get("rows", p.get("size")), p.get("cols", p.get("size")),
                                      p.get("couplings", "pm1"), p.get("fields", "const:0"),
                                      p.get("seed", 0), p.get("beta", 1.0)),
    "random": lambda p: make_random_graph(p["size"], p.get("edge_prob", 0.5), p.get("couplings", "gauss:1"),
                                          p.get("fields", "gauss:0.5"), p.get("seed", 0), p.get("beta", 1.0)),
}

# The experiment families, keyed by a short name usable as "preset" in configs.
PRESETS = {
    "ferro2d-cold": {"generator": "torus_2d", "size": 60, "couplings": "const:1", "fields": "const:0", "beta": 1.0},
    "ferro2d-critical": {"generator": "torus_2d", "size": 60, "couplings": "const:1", "fields": "const:0",
                         "beta": 1 / 2.27},
    "ferro2d-hot": {"generator": "torus_2d", "size": 60, "couplings": "const:1", "fields": "const:0", "beta": 0.2},
    "frustrated2d": {"generator": "torus_2d", "size": 60, "couplings": "pm1", "fields": "pm1", "beta": 1.0},
    "spinglass3d": {"generator": "cube_3d", "size": 9, "couplings": "pm1", "fields": "const:0", "beta": 1.0},
    "rbm-patches": {"generator": "rbm", "n_visible": 784, "n_hidden": 500, "weights": "gauss:0.1", "beta": 1.0},
    "chimera128": {"generator": "chimera", "rows": 4, "cols": 4, "couplings": "pm1", "fields": "const:0",
                   "beta": 1.0},
}


def build_model(spec):
    """Builds a model from a generator mapping ({"generator": ..., ...}) or {"preset": ...} with overrides."""
    spec = dict(spec)
    if "preset" in spec:
        name = spec.pop("preset")
        if name not in PRESETS:
            raise InvalidParameterError(f"unknown preset '{name}' (known: {', '.join(sorted(PRESETS))})")
        spec = {**PRESETS[name], **spec}
    generator = spec.get("generator")
    if generator not in GENERATORS:
        raise InvalidParameterError(f"unknown generator '{generator}' (known: {', '.join(sorted(GENERATORS))})")
    try:
        return GENERATORS[generator](spec)
    except KeyError as e:
        raise InvalidParameterError(f"generator '{generator}' is missing parameter {e}") from e
