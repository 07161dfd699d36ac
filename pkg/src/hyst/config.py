"""Project configuration: one YAML document, overridable by CLI flags.

The embedder/planner/endpoint matrix is too wide for flags alone. Relative
paths resolve against the config file's directory so a project directory
can be moved or checked in wholesale. Credentials are only ever named here
(by environment variable), never stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .corpus import Schema, load_schema
from .dense import CachedEmbedder, EmbeddingProvider, HashedEmbedder, RemoteEmbedder
from .planner import HTTPLLMClient, LLMPlanner, RulePlanner, ScriptedLLMClient

DEFAULT_TEXT_FIELDS = ("title", "description", "reviews")


class ConfigError(ValueError):
    """Raised when the config document is malformed or incomplete."""


@dataclass
class ProjectConfig:
    root: Path
    corpus_path: Path
    schema_path: Path
    index_dir: Path
    cache_dir: Path | None
    text_fields: tuple[str, ...] = DEFAULT_TEXT_FIELDS
    embedder: dict = field(default_factory=lambda: {"id": "hashed", "dim": 256, "seed": 42})
    planner: dict = field(default_factory=lambda: {"id": "rules"})
    k: int = 10
    lam: float = 0.5
    refine: bool = False
    rrf_c: int = 60
    relax: bool = False
    bm25_k1: float | None = None
    bm25_b: float | None = None

    @property
    def records_file(self) -> Path:
        return self.index_dir / "records.jsonl"

    @property
    def bm25_file(self) -> Path:
        return self.index_dir / "bm25.bin"

    @property
    def text_vectors_file(self) -> Path:
        return self.index_dir / "vectors_text.bin"

    @property
    def linearized_vectors_file(self) -> Path:
        return self.index_dir / "vectors_linearized.bin"

    def load_schema(self) -> Schema:
        return load_schema(self.schema_path)


def load_config(path: str | Path) -> ProjectConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")

    root = path.resolve().parent

    def _resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else root / candidate

    paths = data.get("paths", {})
    if not isinstance(paths, dict) or "corpus" not in paths or "schema" not in paths:
        raise ConfigError(f"{path}: 'paths' must declare at least 'corpus' and 'schema'")

    defaults = data.get("defaults", {}) or {}
    embedder = data.get("embedder", {}) or {}
    planner = data.get("planner", {}) or {}
    if not isinstance(embedder, dict) or not isinstance(planner, dict):
        raise ConfigError(f"{path}: 'embedder' and 'planner' must be mappings")

    cache_dir = paths.get("cache_dir")
    return ProjectConfig(
        root=root,
        corpus_path=_resolve(paths["corpus"]),
        schema_path=_resolve(paths["schema"]),
        index_dir=_resolve(paths.get("index_dir", "index")),
        cache_dir=_resolve(cache_dir) if cache_dir else None,
        text_fields=tuple(data.get("text_fields", DEFAULT_TEXT_FIELDS)),
        embedder={"id": "hashed", "dim": 256, "seed": 42, **embedder},
        planner={"id": "rules", **planner},
        k=int(defaults.get("k", 10)),
        lam=float(defaults.get("lambda", 0.5)),
        refine=bool(defaults.get("refine", False)),
        rrf_c=int(defaults.get("rrf_c", 60)),
        relax=bool(defaults.get("relax", False)),
        bm25_k1=defaults.get("bm25_k1"),
        bm25_b=defaults.get("bm25_b"),
    )


def make_embedder(config: ProjectConfig) -> EmbeddingProvider:
    spec = config.embedder
    kind = spec.get("id", "hashed")
    if kind == "hashed":
        provider: EmbeddingProvider = HashedEmbedder(
            dim=int(spec.get("dim", 256)), seed=int(spec.get("seed", 42))
        )
    elif kind == "remote":
        if "base_url" not in spec or "model" not in spec:
            raise ConfigError("remote embedder requires 'base_url' and 'model'")
        provider = RemoteEmbedder(
            base_url=spec["base_url"],
            model=spec["model"],
            credential_env=spec.get("credential_env", "HYST_API_KEY"),
            dim=spec.get("dim"),
        )
    else:
        raise ConfigError(f"unknown embedder id {kind!r} (expected 'hashed' or 'remote')")
    if config.cache_dir is not None:
        cache_file = config.cache_dir / "embeddings.json"
        provider = CachedEmbedder(provider, cache_file)
    return provider


def make_planner(config: ProjectConfig, schema: Schema):
    spec = config.planner
    kind = spec.get("id", "rules")
    value_cap = int(spec.get("value_cap", 500))

    def _template(key: str) -> str | None:
        if key not in spec:
            return None
        template_path = Path(spec[key])
        if not template_path.is_absolute():
            template_path = config.root / template_path
        return template_path.read_text(encoding="utf-8")

    if kind == "rules":
        return RulePlanner(schema)
    if kind == "scripted":
        if "fixture" not in spec:
            raise ConfigError("scripted planner requires a 'fixture' JSONL path")
        fixture = Path(spec["fixture"])
        if not fixture.is_absolute():
            fixture = config.root / fixture
        client = ScriptedLLMClient.from_file(fixture)
        return LLMPlanner(
            client,
            schema,
            filter_template=_template("filter_template"),
            refine_template=_template("refine_template"),
            value_cap=value_cap,
            planner_id="scripted",
        )
    if kind == "llm":
        if "base_url" not in spec or "model" not in spec:
            raise ConfigError("llm planner requires 'base_url' and 'model'")
        client = HTTPLLMClient(
            base_url=spec["base_url"],
            model=spec["model"],
            credential_env=spec.get("credential_env", "HYST_API_KEY"),
        )
        return LLMPlanner(
            client,
            schema,
            filter_template=_template("filter_template"),
            refine_template=_template("refine_template"),
            value_cap=value_cap,
            planner_id="llm",
        )
    raise ConfigError(f"unknown planner id {kind!r} (expected 'rules', 'llm' or 'scripted')")
