"""Run manifests: one TOML file that pins everything a run needs.

All randomness flows from the single manifest seed, and all paths resolve
relative to the manifest file, so (manifest, input files, cassette) fully
determine a run. Command-line flags override individual fields.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .gateway import BackendConfig, PromptTemplate
from .ledger import CostModel
from .router import DEFAULT_GRID

ENDPOINT_ENV = "CONFCASCADE_ENDPOINT"


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class RunManifest:
    corpus_path: Path
    embeddings_path: Path
    output_dir: Path
    k: int = 5
    seed: int = 42
    validation_fraction: float = 0.1
    threshold: float | None = None          # fixed threshold; None = tune on grid
    grid: tuple[float, ...] = DEFAULT_GRID
    unparsed_policy: str = "fallback_local"
    backend: BackendConfig = BackendConfig()
    template: PromptTemplate = PromptTemplate()
    cost: CostModel = CostModel()
    timing: str = "zero"                    # "measured" | "zero"
    corpus_format: str | None = None
    source_path: Path | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ManifestError(f"k must be >= 2, got {self.k}")
        if self.timing not in ("measured", "zero"):
            raise ManifestError(f"timing must be 'measured' or 'zero', got {self.timing!r}")


def _section(data: dict, name: str) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ManifestError(f"[{name}] must be a table")
    return dict(sec)


def load_manifest(path: str | Path, overrides: dict | None = None) -> RunManifest:
    """Parse a TOML manifest; `overrides` (flat key -> value) win over the file."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    base = path.parent
    ov = dict(overrides or {})

    def resolve(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else base / q

    dat = _section(data, "data")
    proto = _section(data, "protocol")
    back = _section(data, "backend")
    tmpl = _section(data, "template")
    cost = _section(data, "cost")
    out = _section(data, "output")

    def pick(key: str, section: dict, section_key: str, default):
        if key in ov and ov[key] is not None:
            return ov[key]
        return section.get(section_key, default)

    corpus_path = pick("corpus", dat, "corpus", None)
    embeddings_path = pick("embeddings", dat, "embeddings", None)
    output_dir = pick("output_dir", out, "dir", None)
    for name, val in (("data.corpus", corpus_path), ("data.embeddings", embeddings_path),
                      ("output.dir", output_dir)):
        if not val:
            raise ManifestError(f"{path}: missing required field {name}")

    backend_kwargs = {
        k: back[k] for k in (
            "kind", "endpoint", "model", "max_tokens", "temperature", "timeout",
            "max_retries", "max_concurrent", "cassette", "mock_completion",
            "response_path",
        ) if k in back
    }
    for flag, cfg_key in (
        ("backend_kind", "kind"), ("endpoint", "endpoint"), ("max_tokens", "max_tokens"),
        ("temperature", "temperature"), ("timeout", "timeout"),
        ("max_retries", "max_retries"), ("max_concurrent", "max_concurrent"),
        ("cassette", "cassette"),
    ):
        if ov.get(flag) is not None:
            backend_kwargs[cfg_key] = ov[flag]
    env_endpoint = os.environ.get(ENDPOINT_ENV)
    if env_endpoint:
        backend_kwargs["endpoint"] = env_endpoint
    if backend_kwargs.get("cassette"):
        backend_kwargs["cassette"] = str(resolve(str(backend_kwargs["cassette"])))
    try:
        backend = BackendConfig(**backend_kwargs)
    except TypeError as exc:
        raise ManifestError(f"{path}: bad [backend] field ({exc})") from exc

    template_kwargs = {}
    if "instruction" in tmpl:
        template_kwargs["instruction"] = tmpl["instruction"]
    if "exemplars" in tmpl:
        exemplars = tmpl["exemplars"]
        if not all(isinstance(e, list) and len(e) == 2 for e in exemplars):
            raise ManifestError(f"{path}: template.exemplars must be [text, class] pairs")
        template_kwargs["exemplars"] = tuple((e[0], e[1]) for e in exemplars)
    template = PromptTemplate(**template_kwargs)

    cost_kwargs = {
        k: cost[k] for k in (
            "gpu_power_kw", "carbon_intensity", "pue", "dollars_per_hour", "folds",
        ) if k in cost
    }
    cost_model = CostModel(**cost_kwargs)

    grid = pick("grid", proto, "grid", list(DEFAULT_GRID))
    timing = pick("timing", out, "timing", None)
    if timing is None:
        timing = "zero" if backend.kind in ("mock", "replay") else "measured"

    return RunManifest(
        corpus_path=resolve(str(corpus_path)),
        embeddings_path=resolve(str(embeddings_path)),
        output_dir=resolve(str(output_dir)),
        k=int(pick("k", proto, "k", 5)),
        seed=int(pick("seed", proto, "seed", 42)),
        validation_fraction=float(pick("validation_fraction", proto, "validation_fraction", 0.1)),
        threshold=(float(pick("threshold", proto, "threshold", None))
                   if pick("threshold", proto, "threshold", None) is not None else None),
        grid=tuple(float(g) for g in grid),
        unparsed_policy=str(pick("unparsed_policy", proto, "unparsed_policy", "fallback_local")),
        backend=backend,
        template=template,
        cost=cost_model,
        timing=str(timing),
        corpus_format=dat.get("format"),
        source_path=path,
    )
