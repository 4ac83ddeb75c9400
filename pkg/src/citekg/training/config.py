"""Plain-text key-value config files.

One ``key = value`` (or ``key value`` / ``key: value``) pair per line,
``#`` comments allowed. Keys follow the hyperparameter-table naming
(``embedding_dimension``, ``learning_rate``, ``num_negatives``,
``regularization``, ``alpha``, ``gamma``, ``psi``, ``dropout``, plus
loop/encoder extras) and are translated to estimator parameters.
"""

from __future__ import annotations

import re

from ..errors import ParseError

_LINE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*(?:[=:]|\s)\s*(.*?)\s*$")

#: config-file key -> estimator parameter
KEY_TO_PARAM = {
    "embedding_dimension": "dim",
    "model_dimension": "dim",
    "learning_rate": "learning_rate",
    "num_negatives": "n_negatives",
    "number_of_negative_samples": "n_negatives",
    "regularization": "regularization",
    "alpha": "alpha",
    "gamma": "gamma",
    "psi": "psi",
    "dropout": "dropout",
    "loss": "loss",
    "batch_size": "batch_size",
    "max_steps": "max_steps",
    "time_budget_s": "time_budget_s",
    "optimizer": "optimizer",
    "fanouts": "fanout",
    "fanout": "fanout",
    "aggregator_type": "aggregator",
    "aggregator": "aggregator",
    "normalization": "normalization",
    "number_of_bases": "n_bases",
    "n_bases": "n_bases",
    "layers": "n_layers",
}


def _coerce(text: str):
    lowered = text.lower()
    if lowered in ("none", ""):
        return None
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def load_kv_config(path) -> dict:
    """Parse a key-value file into raw {key: coerced value}."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            m = _LINE.match(stripped)
            if not m:
                raise ParseError(f"cannot parse config line {stripped!r}",
                                 path, lineno)
            out[m.group(1)] = _coerce(m.group(2))
    return out


def config_to_params(raw: dict) -> dict:
    """Translate config-file keys to estimator parameter names."""
    return {KEY_TO_PARAM.get(k, k): v for k, v in raw.items()}
