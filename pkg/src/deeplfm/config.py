"""Run configuration: flat ``key = value`` files with dotted sections.

Lines are ``key = value``; ``#`` starts a comment; blank lines are
ignored. Keys nest with dots (``train.learning_rate``); hidden layers
take per-layer overrides under ``model.layers.<i>.<field>``, and the
output layer under ``model.output.<field>``. Unknown or missing required
keys raise ``UsageError`` naming the key.
"""

from dataclasses import dataclass, field

from .errors import UsageError
from .model import LayerSpec, NetworkConfig
from .training import TrainConfig


def parse_kv_file(path):
    """Read a key = value file into an ordered dict of strings."""
    entries = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise UsageError(
                        f"{path}:{lineno}: expected 'key = value', got {line.strip()!r}"
                    )
                key, value = text.split("=", 1)
                key = key.strip()
                value = value.strip()
                if not key:
                    raise UsageError(f"{path}:{lineno}: empty key")
                if key in entries:
                    raise UsageError(f"{path}:{lineno}: duplicate key {key!r}")
                entries[key] = value
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    return entries


def write_kv_file(path, entries):
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key} = {value}\n")


def _convert(key, value, kind):
    try:
        if kind is bool:
            lowered = value.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(value)
        return kind(value)
    except ValueError as exc:
        raise UsageError(
            f"config key {key!r}: cannot interpret {value!r} as {kind.__name__}"
        ) from exc


@dataclass
class RunSpec:
    """Everything a training run needs, before the data is loaded."""

    data_csv: str
    splits_csv: str = None
    input_cols: list = None
    target_cols: list = None
    model: dict = field(default_factory=dict)
    layer_overrides: dict = field(default_factory=dict)
    output_overrides: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0

    def network_config(self, input_dim, output_dim):
        m = self.model
        hidden = []
        for i in range(m["hidden_layers"]):
            over = self.layer_overrides.get(i, {})
            hidden.append(LayerSpec(
                width=over.get("width", m["width"]),
                q=over.get("q", m["q"]),
                n_rf=over.get("n_rf", m["n_rf"]),
                kind=over.get("kind", m["kind"]),
            ))
        out = self.output_overrides
        output = LayerSpec(
            width=1,
            q=out.get("q", m["q"]),
            n_rf=out.get("n_rf", m["n_rf"]),
            kind=out.get("kind", m["kind"]),
        )
        return NetworkConfig(
            input_dim=input_dim,
            output_dim=output_dim,
            hidden=hidden,
            output=output,
            skip=m["skip"],
            n_mc=m["n_mc"],
            noise_init=m["noise_init"],
            hidden_ls_init=m["hidden_ls_init"],
            output_ls_init=m["output_ls_init"],
            gamma_init=m["gamma_init"],
            eq_variance_init=m["eq_variance_init"],
            rfrf_prior=m["rfrf_prior"],
        )


_MODEL_SCHEMA = {
    "hidden_layers": (int, 1),
    "width": (int, 3),
    "q": (int, 1),
    "n_rf": (int, 100),
    "kind": (str, "rfrf"),
    "skip": (bool, True),
    "n_mc": (int, 100),
    "noise_init": (float, 0.01),
    "hidden_ls_init": (float, 0.01),
    "output_ls_init": (float, 1.0),
    "gamma_init": (float, 0.01),
    "eq_variance_init": (float, 1.0),
    "rfrf_prior": (str, "bochner"),
}

_TRAIN_SCHEMA = {
    "max_iterations": int,
    "batch_size": int,
    "learning_rate": float,
    "weight_decay": float,
    "validation_fraction": float,
    "log_every": int,
    "input_normalization": str,
}

_LAYER_FIELDS = {"width": int, "q": int, "n_rf": int, "kind": str}


def build_run_spec(entries):
    """Validate a parsed key/value mapping into a RunSpec."""
    entries = dict(entries)
    if "data.csv" not in entries:
        raise UsageError("config is missing required key 'data.csv'")

    spec = RunSpec(data_csv=entries.pop("data.csv"))
    if "data.splits" in entries:
        spec.splits_csv = entries.pop("data.splits")
    if "data.input_cols" in entries:
        spec.input_cols = [
            c.strip() for c in entries.pop("data.input_cols").split(",") if c.strip()
        ]
    if "data.target_cols" in entries:
        spec.target_cols = [
            c.strip() for c in entries.pop("data.target_cols").split(",") if c.strip()
        ]
    if "seed" in entries:
        spec.seed = _convert("seed", entries.pop("seed"), int)

    model = {}
    for name, (kind, default) in _MODEL_SCHEMA.items():
        key = f"model.{name}"
        model[name] = (
            _convert(key, entries.pop(key), kind) if key in entries else default
        )
    spec.model = model

    train_kwargs = {"seed": spec.seed}
    for name, kind in _TRAIN_SCHEMA.items():
        key = f"train.{name}"
        if key in entries:
            train_kwargs[name] = _convert(key, entries.pop(key), kind)
    spec.train = TrainConfig(**train_kwargs)

    for key in list(entries):
        parts = key.split(".")
        if len(parts) == 4 and parts[0] == "model" and parts[1] == "layers":
            try:
                index = int(parts[2])
            except ValueError as exc:
                raise UsageError(f"config key {key!r}: bad layer index") from exc
            if parts[3] not in _LAYER_FIELDS:
                raise UsageError(f"unknown config key {key!r}")
            if index < 0 or index >= model["hidden_layers"]:
                raise UsageError(
                    f"config key {key!r}: layer index {index} outside "
                    f"0..{model['hidden_layers'] - 1}"
                )
            spec.layer_overrides.setdefault(index, {})[parts[3]] = _convert(
                key, entries.pop(key), _LAYER_FIELDS[parts[3]]
            )
        elif len(parts) == 3 and parts[0] == "model" and parts[1] == "output":
            if parts[2] not in _LAYER_FIELDS or parts[2] == "width":
                raise UsageError(f"unknown config key {key!r}")
            spec.output_overrides[parts[2]] = _convert(
                key, entries.pop(key), _LAYER_FIELDS[parts[2]]
            )

    if entries:
        raise UsageError(f"unknown config key {sorted(entries)[0]!r}")
    spec.train.validate()
    return spec
