from __future__ import annotations
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, List, Optional

from .cache import TranslationCache
from .config import Settings, api_key_env, load_settings
from .errors import ConfigError, LanguageMissing, ModelMissing, ParseError, SkoslateError, UnsupportedFormat
from .llm import DEFAULT_MODEL, ChatCompletionClient, LlmClient, LlmConfig
from .pipeline import PipelineConfig, translate_thesaurus
from .providers import DEFAULT_MAX_INFLIGHT, DEFAULT_PRIORITY, ProviderRegistry, parse_provider_list
from .services import build_registry
from .skos_graph import LabelProperty, Thesaurus, parse_thesaurus, serialize

log = logging.getLogger("skoslate")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARSE = 2
EXIT_UNTRANSLATED = 3

DEFAULT_CACHE = Path("~/.cache/skoslate/translations.jsonl")


OK = {"tag": "OK"}


class TagFormatter(logging.Formatter):
    """Renders `%(tag)s`: the record's own tag if it has one, else the level name (WARNING as WARN)."""

    LEVEL_TAGS = {logging.WARNING: "WARN"}

    def format(self, record: logging.LogRecord) -> str:
        if not getattr(record, "tag", None):
            record.tag = self.LEVEL_TAGS.get(record.levelno, record.levelname)
        return super().format(record)


def _setup_logging(args: argparse.Namespace) -> None:
    for h in list(log.handlers):
        if getattr(h, "_skoslate", False):
            log.removeHandler(h)
            h.close()

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(TagFormatter("[%(tag)s] %(message)s"))
    console.setLevel(logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO)
    console._skoslate = True  # type: ignore[attr-defined]
    log.addHandler(console)
    if args.log is not None:
        fh = logging.FileHandler(args.log, encoding="utf-8")
        fh.setFormatter(TagFormatter("%(asctime)s [%(tag)s] %(name)s: %(message)s"))
        fh.setLevel(logging.DEBUG)
        fh._skoslate = True  # type: ignore[attr-defined]
        log.addHandler(fh)
    log.setLevel(logging.DEBUG)


def _apply_cli_settings(args: argparse.Namespace, settings: Settings) -> None:
    """Fill `--log/--quiet/--verbose` from `[cli]` when the flags are absent."""
    args.log = _pick(args.log, settings, "cli", "log", None)
    if args.log is not None:
        args.log = Path(args.log).expanduser()
    args.quiet = bool(args.quiet or settings.get_bool("cli", "quiet", False))
    args.verbose = bool(args.verbose or settings.get_bool("cli", "verbose", False))


def _pick(flag: Any, settings: Settings, section: str, key: str, default: Any,
          getter: Optional[Callable[..., Any]] = None) -> Any:
    """Flag beats config file beats default."""
    if flag is not None:
        return flag
    getter = getter or settings.get
    return getter(section, key, default)


def _open_cache(args: argparse.Namespace, settings: Settings) -> Optional[TranslationCache]:
    if args.no_cache or settings.get_bool("cache", "enabled", True) is False:
        return None
    path = _pick(args.cache, settings, "cache", "path", str(DEFAULT_CACHE))
    return TranslationCache(Path(path))


def _llm_config(args: argparse.Namespace, settings: Settings) -> Optional[LlmConfig]:
    if args.no_llm or settings.get_bool("llm", "enabled", True) is False:
        return None
    cfg = LlmConfig(
        model_id=_pick(args.llm_model, settings, "llm", "model", DEFAULT_MODEL),
        temperature=_pick(args.temperature, settings, "llm", "temperature", 0.0, settings.get_float),
        max_retries=settings.get_int("llm", "max_retries", 3),
        timeout=settings.get_float("llm", "timeout", 30.0),
        supports_system_prompt=settings.get_bool("llm", "supports_system_prompt", True),
        repeat_instructions=bool(args.repeat_instructions
                                 or settings.get_bool("llm", "repeat_instructions", False)),
    )
    endpoint = _pick(args.llm_endpoint, settings, "llm", "endpoint", None)
    if endpoint:
        cfg.endpoint = endpoint
    return cfg


def _llm_client(cfg: Optional[LlmConfig]) -> Optional[LlmClient]:
    if cfg is None:
        return None
    if not os.environ.get(cfg.api_key_env):
        log.warning("%s is not set; LLM refinement disabled (frequency fallback only)", cfg.api_key_env)
        return None
    return ChatCompletionClient(cfg)


def _label_property(name: str) -> LabelProperty:
    try:
        return LabelProperty.from_name(name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _pipeline_config(args: argparse.Namespace, settings: Settings, target_lang: Optional[str]) -> PipelineConfig:
    if not target_lang:
        raise ConfigError("a target language is required (--target-lang or [pipeline] target_lang)")
    order = parse_provider_list(args.providers) if args.providers else settings.get_list("pipeline", "providers")
    skip_existing = not args.force and settings.get_bool("pipeline", "skip_existing", True)
    audit = _pick(args.audit_log, settings, "pipeline", "audit_log", None)
    return PipelineConfig(
        target_lang=target_lang,
        prop=_label_property(_pick(args.prop, settings, "pipeline", "prop", "prefLabel")),
        threshold=_pick(args.threshold, settings, "pipeline", "threshold", 0.6, settings.get_float),
        min_translations=_pick(args.min_translations, settings, "pipeline", "min_translations", 5,
                               settings.get_int),
        provider_order=order,
        llm=_llm_config(args, settings),
        skip_existing=skip_existing,
        max_inflight=_pick(args.max_inflight, settings, "pipeline", "max_inflight", DEFAULT_MAX_INFLIGHT,
                           settings.get_int),
        assume_source_lang=_pick(args.assume_source_lang, settings, "pipeline", "assume_source_lang", None),
        mark_generated=bool(args.mark_generated or settings.get_bool("pipeline", "mark_generated", False)),
        context=_pick(args.context, settings, "pipeline", "context", None),
        audit_log=Path(audit) if audit else None,
        show_progress=not args.quiet,
    )


def _registry(args: argparse.Namespace, settings: Settings, max_inflight: int = DEFAULT_MAX_INFLIGHT
              ) -> ProviderRegistry:
    return build_registry(settings, cache=_open_cache(args, settings), max_inflight=max_inflight)


def _default_out(path: Path, lang: str) -> Path:
    return path.with_name(f"{path.stem}.{lang}{path.suffix or '.ttl'}")


def _out_format(path: Path, explicit: Optional[str]) -> str:
    if explicit:
        return explicit
    return "rdfxml" if path.suffix.lower() in (".rdf", ".xml", ".owl") else "turtle"


def _input_format(args: argparse.Namespace, settings: Settings) -> str:
    return _pick(args.format, settings, "pipeline", "format", "auto")


# ----------------------------- commands -----------------------------

def cmd_translate(args: argparse.Namespace, settings: Settings) -> int:
    target = _pick(args.target_lang, settings, "pipeline", "target_lang", None)
    cfg = _pipeline_config(args, settings, target)
    registry = _registry(args, settings, cfg.max_inflight)
    cfg.validate(registry)

    thesaurus = parse_thesaurus(args.input, _input_format(args, settings))
    llm = _llm_client(cfg.llm)
    enriched, report = translate_thesaurus(thesaurus, cfg, registry, llm)

    out = Path(_pick(args.out, settings, "translate", "out", None) or _default_out(args.input, cfg.target_lang))
    out_format = _pick(args.out_format, settings, "translate", "out_format", None)
    serialize(enriched, out, _out_format(out, out_format))
    log.info("Wrote %s (%d new label(s))", out, report.written, extra=OK)
    report_path = _pick(args.report, settings, "translate", "report", None)
    if report_path:
        report.to_json(Path(report_path))
        log.info("Run report: %s", report_path, extra=OK)
    if not args.quiet:
        print(report.render_table(), file=sys.stderr)

    if report.all_untranslated:
        log.error("No term could be translated")
        return EXIT_UNTRANSLATED
    return EXIT_OK


def _measures(args: argparse.Namespace, settings: Settings, bpemb_dir: Optional[str]) -> List[str]:
    from .simeval import MEASURES, STRING_MEASURES

    raw = args.measures or settings.get("evaluate", "measures")
    if raw:
        chosen = [m for m in raw.replace(",", " ").split() if m]
        unknown = [m for m in chosen if m not in MEASURES]
        if unknown:
            raise ConfigError(f"unknown measure(s) {', '.join(unknown)}; choose from {','.join(MEASURES)}")
        return chosen
    if bpemb_dir:
        return list(MEASURES)
    log.warning("No --bpemb-dir given; skipping the cosine measure")
    return list(STRING_MEASURES)


def cmd_evaluate(args: argparse.Namespace, settings: Settings) -> int:
    from .embeddings import DEFAULT_DIM, DEFAULT_VOCAB_SIZE, load_embedding_model
    from .simeval import evaluate_backtranslation, write_summary_csv, summary_frame

    langs = args.strip_lang or settings.get_list("evaluate", "strip_lang") or []
    if not langs:
        raise ConfigError("evaluate needs at least one --strip-lang")
    bpemb_dir = _pick(args.bpemb_dir, settings, "evaluate", "bpemb_dir", None)
    vs = _pick(args.bpemb_vs, settings, "evaluate", "bpemb_vs", DEFAULT_VOCAB_SIZE, settings.get_int)
    dim = _pick(args.bpemb_dim, settings, "evaluate", "bpemb_dim", DEFAULT_DIM, settings.get_int)
    measures = _measures(args, settings, bpemb_dir)

    # check every language's config before touching the network
    cfgs = [_pipeline_config(args, settings, lang) for lang in langs]
    registry = _registry(args, settings, cfgs[0].max_inflight)
    for cfg in cfgs:
        cfg.validate(registry)

    thesaurus = parse_thesaurus(args.input, _input_format(args, settings))
    llm = _llm_client(cfgs[0].llm)

    reports = []
    for lang, cfg in zip(langs, cfgs):
        model = None
        if "cosine" in measures:
            if not bpemb_dir:
                raise ModelMissing("the cosine measure needs --bpemb-dir (see scripts/get_bpemb.sh)")
            model = load_embedding_model(bpemb_dir, lang, vs, dim)

        def back_translate(t: Thesaurus, cfg: PipelineConfig = cfg) -> Thesaurus:
            return translate_thesaurus(t, cfg, registry, llm)[0]

        reports.append(evaluate_backtranslation(thesaurus, lang, cfg.prop, back_translate,
                                                model=model, measures=measures))

    report_path = _pick(args.report, settings, "evaluate", "report", None)
    if report_path:
        report_path = Path(report_path)
        payload = {r.language: r.to_dict() for r in reports}
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report_path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        write_summary_csv(reports, report_path.with_suffix(".csv"))
        log.info("Evaluation report: %s (+ %s)", report_path, report_path.with_suffix(".csv").name, extra=OK)

    plot_path = _pick(args.plot, settings, "evaluate", "plot", None)
    if plot_path:
        from .viz import plot_macro_scores, plot_score_distribution

        plot_path = Path(plot_path)
        plot_path.parent.mkdir(parents=True, exist_ok=True)
        plot_macro_scores(reports, plot_path)
        for r in reports:
            plot_score_distribution(r, plot_path.with_name(f"{plot_path.stem}_{r.language}_dist.png"))
        log.info("Figures: %s", plot_path, extra=OK)

    print(summary_frame(reports).to_string(index=False))
    return EXIT_OK


def cmd_providers(args: argparse.Namespace, settings: Settings) -> int:
    import pandas as pd

    registry = _registry(args, settings)
    raw = args.providers or settings.get("pipeline", "providers")
    order = registry.ordered(parse_provider_list(raw) if raw else None)
    if args.check_pair:
        src, tgt = args.check_pair
        order = [d for d in order if d.supports(src, tgt)]
        if not order:
            print(f"No registered provider supports {src}->{tgt}")
            return EXIT_OK

    stats = registry.stats()
    rows = []
    for d in order:
        rows.append({
            "id": d.id,
            "rank": d.priority,
            "recommended": DEFAULT_PRIORITY.index(d.id) + 1 if d.id in DEFAULT_PRIORITY else "",
            "needs_key": "yes" if d.requires_key else "no",
            "key_set": ("yes" if os.environ.get(api_key_env(d.id)) else "no") if d.requires_key else "",
            **stats[d.id],
        })
    print(pd.DataFrame(rows).to_string(index=False))
    return EXIT_OK


def cmd_cache(args: argparse.Namespace, settings: Settings) -> int:
    if args.no_cache:
        raise ConfigError("--no-cache makes no sense with the cache command")
    path = Path(_pick(args.cache, settings, "cache", "path", str(DEFAULT_CACHE))).expanduser()
    cache = TranslationCache(path)
    if args.clear:
        n = cache.clear()
        log.info("Removed %d cached translation(s) from %s", n, path, extra=OK)
        return EXIT_OK
    print(json.dumps(cache.stats(), indent=2))
    return EXIT_OK


# ----------------------------- argument parsing -----------------------------

def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, default=None, help="INI config file (flags override it).")
    p.add_argument("--cache", type=Path, default=None,
                   help=f"Translation cache file (default: {DEFAULT_CACHE}).")
    p.add_argument("--no-cache", action="store_true", help="Neither read nor write the translation cache.")
    p.add_argument("--log", type=Path, default=None, help="Append a detailed run log here.")
    p.add_argument("--quiet", action="store_true", help="Only warnings and errors; no progress bar.")
    p.add_argument("--verbose", action="store_true", help="Debug output (cache hits, retries, prompts).")
    return p


def _pipeline_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("input", type=Path, help="SKOS thesaurus (.ttl, .rdf, .xml).")
    p.add_argument("--format", choices=["auto", "turtle", "rdfxml"], default=None,
                   help="Input RDF syntax (default: auto, from extension then content).")
    p.add_argument("--prop", default=None,
                   help="Label property to translate: prefLabel, altLabel, definition or an IRI "
                        "(default: prefLabel).")
    p.add_argument("--threshold", type=float, default=None,
                   help="Frequency confidence needed to accept without the LLM, in (0, 1] (default: 0.6).")
    p.add_argument("--min-translations", type=int, default=None,
                   help="Minimum primary candidates per term (default: 5).")
    p.add_argument("--providers", default=None,
                   help="Comma-separated provider order (default: " + ",".join(DEFAULT_PRIORITY) + ").")
    p.add_argument("--max-inflight", type=int, default=None,
                   help=f"Concurrent terms and outbound requests (default: {DEFAULT_MAX_INFLIGHT}).")
    p.add_argument("--llm-model", default=None, help=f"LLM model id (default: {DEFAULT_MODEL}).")
    p.add_argument("--llm-endpoint", default=None, help="Chat-completion endpoint URL.")
    p.add_argument("--temperature", type=float, default=None, help="LLM temperature (default: 0).")
    p.add_argument("--no-llm", action="store_true",
                   help="Skip LLM refinement; low-confidence terms use the frequency fallback.")
    p.add_argument("--repeat-instructions", action="store_true",
                   help="Also repeat the instructions inside the prompt input.")
    p.add_argument("--context", default=None, help="Extra context text added to every LLM prompt.")
    p.add_argument("--assume-source-lang", default=None,
                   help="Language of untagged labels (default: untagged labels are skipped).")
    p.add_argument("--force", action="store_true",
                   help="Also translate terms that already have a target-language label.")
    p.add_argument("--mark-generated", action="store_true",
                   help="Add a skos:editorialNote to every concept that received a machine label.")
    p.add_argument("--audit-log", type=Path, default=None,
                   help="JSON-lines log of prompts, raw LLM replies and routes for refined terms.")
    return p


def build_argparser() -> argparse.ArgumentParser:
    common = _common_flags()
    pipe = _pipeline_flags()
    p = argparse.ArgumentParser(
        prog="skoslate",
        description="Translate SKOS thesaurus labels with a service ensemble, "
                    "frequency consensus and LLM refinement.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("translate", parents=[common, pipe], help="Add target-language labels to a thesaurus.")
    t.add_argument("--target-lang", default=None, help="Target language tag, e.g. de.")
    t.add_argument("--out", type=Path, default=None,
                   help="Output file (default: <input>.<lang>.<ext> next to the input).")
    t.add_argument("--out-format", choices=["turtle", "rdfxml"], default=None,
                   help="Output syntax (default: from --out extension).")
    t.add_argument("--report", type=Path, default=None, help="Write the JSON run report here.")
    t.set_defaults(func=cmd_translate)

    e = sub.add_parser("evaluate", parents=[common, pipe],
                       help="Back-translation evaluation: strip a language, translate it back, compare.")
    e.add_argument("--strip-lang", action="append", default=None,
                   help="Language to remove and translate back (repeatable).")
    e.add_argument("--measures", default=None,
                   help="Comma-separated subset of exact,levenshtein,jaro_winkler,cosine "
                        "(default: all; cosine only with --bpemb-dir).")
    e.add_argument("--report", type=Path, default=None,
                   help="JSON per-term report; aggregates go to the same name with .csv.")
    e.add_argument("--plot", type=Path, default=None, help="PNG of macro scores (+ per-language distributions).")
    e.add_argument("--bpemb-dir", default=None, help="Directory with BPEmb .model and .w2v.bin files.")
    e.add_argument("--bpemb-vs", type=int, default=None, help="BPEmb vocabulary size (default: 1000).")
    e.add_argument("--bpemb-dim", type=int, default=None, help="BPEmb vector dimension (default: 25).")
    e.set_defaults(func=cmd_evaluate)

    pr = sub.add_parser("providers", parents=[common], help="List providers or check a language pair.")
    g = pr.add_mutually_exclusive_group(required=True)
    g.add_argument("--list", action="store_true", help="Registered providers in effective priority order.")
    g.add_argument("--check-pair", nargs=2, metavar=("SRC", "TGT"), help="Providers supporting SRC->TGT.")
    pr.add_argument("--providers", default=None, help="Provider order to apply.")
    pr.set_defaults(func=cmd_providers)

    c = sub.add_parser("cache", parents=[common], help="Inspect or clear the translation cache.")
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--stats", action="store_true", help="Entries, size and hit counts as JSON.")
    g.add_argument("--clear", action="store_true", help="Delete every cached translation.")
    c.set_defaults(func=cmd_cache)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_argparser().parse_args(argv)
    _setup_logging(args)
    try:
        settings = load_settings(args.config)
        _apply_cli_settings(args, settings)
        _setup_logging(args)
        return args.func(args, settings)
    except (ParseError, UnsupportedFormat, LanguageMissing) as exc:
        log.error("%s", exc)
        return EXIT_PARSE
    except (ConfigError, ModelMissing) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except SkoslateError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
