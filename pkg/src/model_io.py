"""
Line-oriented model text format:

    ising <M> <beta>
    e <i> <j> <J>          (0-based, i < j; sorted lexicographically on write)
    h <i> <value>          (only nonzero fields are written)
    bipartition <k>        (optional: visible-layer size)

Blank lines and lines starting with '#' are ignored. Floats are written with
repr() so a load after save reproduces the model exactly.
"""
import numpy as np

from errors import ModelFormatError
from ising_model import IsingModel
from logger_config import logger


def format_model(model):
    lines = [f"ising {model.num_spins} {model.beta!r}"]
    lines.extend(f"e {i} {j} {coupling!r}" for i, j, coupling in model.edges)
    lines.extend(f"h {i} {float(value)!r}" for i, value in enumerate(model.fields) if value != 0.0)
    if model.bipartition is not None:
        lines.append(f"bipartition {model.bipartition}")
    return "\n".join(lines) + "\n"


def parse_model(text, source="<string>"):
    header = None
    edges = []
    field_entries = []
    bipartition = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "ising":
                if header is not None or len(parts) != 3:
                    raise ModelFormatError(f"{source}:{lineno}: header must be 'ising M beta' and appear once")
                header = (int(parts[1]), float(parts[2]))
            elif tag == "e" and len(parts) == 4:
                edges.append((int(parts[1]), int(parts[2]), float(parts[3])))
            elif tag == "h" and len(parts) == 3:
                field_entries.append((int(parts[1]), float(parts[2])))
            elif tag == "bipartition" and len(parts) == 2:
                bipartition = int(parts[1])
            else:
                raise ModelFormatError(f"{source}:{lineno}: unrecognized line '{line}'")
        except ValueError as e:
            if isinstance(e, ModelFormatError):
                raise
            raise ModelFormatError(f"{source}:{lineno}: bad number in '{line}'") from e

    if header is None:
        raise ModelFormatError(f"{source}: missing 'ising M beta' header")
    num_spins, beta = header
    fields = np.zeros(num_spins)
    for i, value in field_entries:
        if not 0 <= i < num_spins:
            raise ModelFormatError(f"{source}: field index {i} outside 0..{num_spins - 1}")
        fields[i] = value
    for i, j, _ in edges:
        if i >= j:
            raise ModelFormatError(f"{source}: edge ({i}, {j}) must satisfy i < j")
    try:
        return IsingModel(num_spins, edges, fields, beta=beta, bipartition=bipartition)
    except ValueError as e:
        raise ModelFormatError(f"{source}: {e}") from e


def save_model(model, path):
    with open(path, "w") as f:
        f.write(format_model(model))
    logger.info(f"Wrote {model} to {path}")


def load_model(path):
    with open(path) as f:
        model = parse_model(f.read(), source=str(path))
    logger.info(f"Loaded {model} from {path}")
    return model
