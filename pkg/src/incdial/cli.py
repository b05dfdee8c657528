"""Command-line driver: induce, train, enumerate variants, chat, serve.

Artifacts live in an output directory (default ``out/``): goalspec.json and
rules.json from induction, policy.json and training.csv from training,
variants.txt from variant enumeration.  Every subcommand is deterministic
given its input files, flags, and seed.

Exit codes: 0 success, 2 configuration error (missing files, bad flags),
3 data error (files that parse but violate a contract, hash mismatches,
unknown corpus words), 4 unexpected runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from random import Random
from typing import Optional

from .agent import drive
from .grammar import (
    CorpusError,
    DialogueContext,
    Lexicon,
    LexiconError,
    ParseFailure,
    UngrammaticalWord,
    USR,
    advance,
    load_corpus,
    load_lexicon,
    tokenize,
)
from .induction import (
    GoalSpec,
    InductionError,
    LexiconMismatch,
    encode,
    induce,
    load_goalspec,
    save_goalspec,
)
from .learner import (
    EnvConfig,
    LearnerError,
    Policy,
    TrainConfig,
    WordEnv,
    evaluate,
    load_policy,
    save_policy,
    shape_of,
    train,
    write_training_log,
)
from .simulator import (
    RuleSet,
    SimulatorError,
    extract_rules,
    load_ruleset,
    save_ruleset,
)
from .ttr import RecordTypeError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

# offset keeping the environment's realization stream independent of the
# exploration stream when both derive from one --seed
ENV_SEED_OFFSET = 1000003
EVAL_SEED_OFFSET = 9999
EVAL_EPISODES = 200


class ConfigError(ValueError):
    """Unusable invocation: missing files or malformed configuration."""


def _packaged(name: str) -> Path:
    return Path(str(resources.files("incdial").joinpath("data", name)))


@dataclass(frozen=True, slots=True)
class ProjectConfig:
    lexicon: Path
    corpus: Path
    augmentation: Optional[Path]
    out: Path
    env: EnvConfig
    train: TrainConfig


def load_project_config(path: Optional[str] = None) -> ProjectConfig:
    """Defaults come from the packaged domain; a JSON config overrides
    field-by-field, paths resolved relative to the config file."""
    doc: dict = {}
    base = Path.cwd()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as err:
            raise ConfigError(f"{p}: not valid JSON: {err}") from err
        if not isinstance(doc, dict):
            raise ConfigError(f"{p}: config must be a JSON object")
        base = p.parent

    def file_of(key: str, default: Optional[Path]) -> Optional[Path]:
        if key in doc:
            return (base / doc[key]) if doc[key] else None
        return default

    lexicon = file_of("lexicon", _packaged("lexicon.json"))
    corpus = file_of("corpus", _packaged("corpus.txt"))
    augmentation = file_of("augmentation", _packaged("augmentation.json"))
    out = (base / doc["out"]) if "out" in doc else Path("out")
    try:
        env = EnvConfig(**doc.get("env", {}))
        train_cfg = TrainConfig(**doc.get("train", {}))
    except (TypeError, LearnerError) as err:
        raise ConfigError(f"bad env/train configuration: {err}") from err
    for label, file in (("lexicon", lexicon), ("corpus", corpus),
                        ("augmentation", augmentation)):
        if file is not None and not file.is_file():
            raise ConfigError(f"{label} file not found: {file}")
    return ProjectConfig(lexicon, corpus, augmentation, out, env, train_cfg)


def _load_artifact(path: Path, loader, what: str):
    if not path.is_file():
        raise ConfigError(
            f"{what} not found: {path} (run the earlier pipeline step first)")
    return loader(path)


def _check_hash(lexicon: Lexicon, artifact_hash: str) -> None:
    if artifact_hash != lexicon.hash:
        raise LexiconMismatch(lexicon.hash, artifact_hash)


# --------------------------------------------------------------------------
# Subcommands


def cmd_induce(cfg: ProjectConfig) -> tuple[GoalSpec, RuleSet]:
    lexicon = load_lexicon(cfg.lexicon)
    corpus = load_corpus(cfg.corpus)
    spec = induce(corpus, lexicon)
    rules = extract_rules(corpus, lexicon, spec, cfg.augmentation)
    cfg.out.mkdir(parents=True, exist_ok=True)
    save_goalspec(spec, cfg.out / "goalspec.json")
    save_ruleset(rules, cfg.out / "rules.json")
    print(f"m = {spec.m} features")
    for i, phi in enumerate(spec.features.features):
        print(f"  phi_{i}: {phi.text()}")
    by_sort: dict[str, list[str]] = {}
    for entry in lexicon.slot_entries():
        by_sort.setdefault(entry.sort, [])
        if entry.word not in by_sort[entry.sort]:
            by_sort[entry.sort].append(entry.word)
    for sort in spec.slot_sorts:
        print(f"slot {sort}: {', '.join(by_sort.get(sort, []))}")
    print(f"{len(rules.rules)} simulator rules")
    print(f"wrote {cfg.out / 'goalspec.json'} and {cfg.out / 'rules.json'}")
    return spec, rules


def cmd_train(cfg: ProjectConfig) -> Policy:
    lexicon = load_lexicon(cfg.lexicon)
    goalspec_path = cfg.out / "goalspec.json"
    rules_path = cfg.out / "rules.json"
    if goalspec_path.is_file() and rules_path.is_file():
        spec = load_goalspec(goalspec_path)
        rules = load_ruleset(rules_path)
        _check_hash(lexicon, spec.lexicon_hash)
        _check_hash(lexicon, rules.lexicon_hash)
    else:
        spec, rules = cmd_induce(cfg)
    records = []
    policy = train(lexicon, spec, rules, cfg.train, cfg.env, records.append)
    cfg.out.mkdir(parents=True, exist_ok=True)
    save_policy(policy, cfg.out / "policy.json")
    write_training_log(records, cfg.out / "training.csv")
    stats = evaluate(policy, rules, EVAL_EPISODES,
                     seed=cfg.train.seed + EVAL_SEED_OFFSET, lexicon=lexicon)
    print(f"trained {cfg.train.episodes} episodes "
          f"(alpha={cfg.train.alpha}, gamma={cfg.train.gamma}, "
          f"seed={cfg.train.seed}); {len(policy.q)} states visited")
    print(f"evaluation over {stats.episodes} greedy episodes: "
          f"success_rate={stats.success_rate}, "
          f"mean_length={stats.mean_length}, "
          f"distinct_successful_shapes={stats.distinct_dialogue_shapes}")
    print(f"wrote {cfg.out / 'policy.json'} and {cfg.out / 'training.csv'}")
    return policy


def _delex_shape(transcript, lexicon: Lexicon) -> str:
    parts = []
    for speaker, word in transcript:
        sort = lexicon.slot_sort_of(word)
        parts.append(f"{speaker}:" + (f"⟨{sort}⟩" if sort else word))
    return " ".join(parts)


def variants_report(policy: Policy, rules: RuleSet, lexicon: Lexicon,
                    n: int, seed: int) -> str:
    """Sample n episodes, half greedy and half epsilon=0.2, and group their
    transcripts by delexicalized shape.  Deterministic for a fixed seed."""
    env = WordEnv(lexicon, policy.spec, rules,
                  replace(policy.env_config, seed=seed))
    explore = Random(seed + 1)
    groups: Counter[tuple[str, str]] = Counter()
    brands: set[str] = set()
    successes = 0
    for episode in range(n):
        eps = 0.0 if episode % 2 == 0 else 0.2
        s = env.reset().text()
        done = False
        while not done:
            if explore.random() < eps:
                a = env.actions[explore.randrange(len(env.actions))]
            else:
                a = policy.greedy(s)
            sv, r, done, info = env.step(a)
            s = sv.text()
        transcript = env.context.transcript
        outcome = info["event"]
        groups[(_delex_shape(transcript, lexicon), outcome)] += 1
        if outcome == "goal":
            successes += 1
            brands.update(w for _, w in transcript
                          if lexicon.slot_sort_of(w) == "brand")
    success_shapes = {shape for (shape, outcome) in groups if outcome == "goal"}
    lines = [
        "dialogue variants",
        f"episodes: {n} ({(n + 1) // 2} greedy, {n // 2} epsilon=0.2), seed: {seed}",
        f"successful episodes: {successes}",
        f"distinct successful shapes: {len(success_shapes)}",
        f"brands in successful dialogues: {', '.join(sorted(brands)) or '-'}",
        "",
        "count  outcome         shape",
    ]
    for (shape, outcome), count in sorted(
            groups.items(), key=lambda kv: (-kv[1], kv[0])):
        lines.append(f"{count:5d}  {outcome:<14s} {shape}")
    return "\n".join(lines) + "\n"


def cmd_variants(cfg: ProjectConfig, n: int, seed: int) -> str:
    lexicon = load_lexicon(cfg.lexicon)
    policy = _load_artifact(cfg.out / "policy.json", load_policy, "policy")
    rules = _load_artifact(cfg.out / "rules.json", load_ruleset, "rule set")
    _check_hash(lexicon, policy.lexicon_hash)
    _check_hash(lexicon, rules.lexicon_hash)
    report = variants_report(policy, rules, lexicon, n, seed)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "variants.txt").write_text(report)
    print(report, end="")
    print(f"wrote {cfg.out / 'variants.txt'}")
    return report


# --------------------------------------------------------------------------
# Chat


class TerminalChatIO:
    """Line-oriented terminal I/O with a between-words interrupt window."""

    def __init__(self, delay: float = 0.3):
        self.delay = delay

    def write(self, line: str) -> None:
        print(line, flush=True)

    def readline(self, prompt: str) -> Optional[str]:
        try:
            return input(prompt)
        except EOFError:
            return None

    def poll(self) -> Optional[str]:
        import select
        ready, _, _ = select.select([sys.stdin], [], [], self.delay)
        if ready:
            line = sys.stdin.readline()
            return line.rstrip("\n") if line else None
        return None


def run_chat(policy: Policy, lexicon: Lexicon, io) -> int:
    """The interactive loop: human is USR, policy drives SYS words.

    A line typed while the system is speaking interrupts the turn; the
    remaining system words are discarded and the line is processed next.
    """
    spec = policy.spec
    ctx = DialogueContext.new(lexicon)
    io.write("words the system knows: " + ", ".join(lexicon.vocabulary))
    io.write("say something, or send an empty line to let the system speak; "
             "end of input quits")
    pending: Optional[str] = None
    while True:
        line = pending if pending is not None else io.readline("USR> ")
        pending = None
        if line is None:
            io.write("bye")
            return EXIT_OK
        for token in tokenize(line):
            try:
                ctx = advance(ctx, token, USR)
                io.write(f"  ok {token}  [{encode(ctx, spec).text()}]")
            except UngrammaticalWord:
                io.write(f"  rejected {token!r} — known words: "
                         + ", ".join(lexicon.vocabulary))
        for word, ctx in drive(policy, ctx):
            io.write(f"SYS: {word}  [{encode(ctx, spec).text()}]")
            typed = io.poll()
            if typed is not None:
                pending = typed
                break
        if encode(ctx, spec).goal_reached():
            io.write("success: the goal proposition is grounded")
            io.write("transcript: " + shape_of(ctx.transcript))
            return EXIT_OK


def cmd_chat(cfg: ProjectConfig, io=None) -> int:
    lexicon = load_lexicon(cfg.lexicon)
    policy = _load_artifact(cfg.out / "policy.json", load_policy, "policy")
    rules = _load_artifact(cfg.out / "rules.json", load_ruleset, "rule set")
    _check_hash(lexicon, policy.lexicon_hash)
    _check_hash(lexicon, rules.lexicon_hash)
    return run_chat(policy, lexicon, io or TerminalChatIO())


def cmd_serve(cfg: ProjectConfig, host: str, port: int, delay: float,
              static_dir: Optional[str]) -> int:
    from .service import create_app
    import uvicorn

    lexicon = load_lexicon(cfg.lexicon)
    policy = _load_artifact(cfg.out / "policy.json", load_policy, "policy")
    rules = _load_artifact(cfg.out / "rules.json", load_ruleset, "rule set")
    _check_hash(lexicon, policy.lexicon_hash)
    _check_hash(lexicon, rules.lexicon_hash)
    app = create_app(policy, lexicon, rules=rules, delay=delay,
                     static_dir=static_dir)
    print(f"serving on {host}:{port} "
          f"(policy over lexicon {lexicon.hash[:12]}…, m={policy.spec.m})")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


# --------------------------------------------------------------------------
# Entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="incdial",
        description="Induce, train, and talk to an incremental word-level "
                    "dialogue agent bootstrapped from raw transcripts.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="project config JSON")
        p.add_argument("--out", help="artifact directory (default: out)")

    p = sub.add_parser("induce", help="derive goal, features, simulator rules")
    common(p)

    p = sub.add_parser("train", help="Q-learning against the simulator")
    common(p)
    p.add_argument("--seed", type=int, help="training seed (env seed derived)")
    p.add_argument("--episodes", type=int, help="training episodes")

    p = sub.add_parser("variants", help="sample and group dialogue variants")
    common(p)
    p.add_argument("--n", type=int, default=200, help="episodes to sample")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("chat", help="talk to the trained agent in the terminal")
    common(p)

    p = sub.add_parser("serve", help="run the websocket session service")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--delay", type=float, default=0.3,
                   help="inter-word streaming delay in seconds")
    p.add_argument("--static", help="directory of browser client files")
    return parser


def _configure(args) -> ProjectConfig:
    cfg = load_project_config(args.config)
    if args.out:
        cfg = replace(cfg, out=Path(args.out))
    if getattr(args, "seed", None) is not None and args.command == "train":
        cfg = replace(cfg,
                      train=replace(cfg.train, seed=args.seed),
                      env=replace(cfg.env, seed=args.seed + ENV_SEED_OFFSET))
    if getattr(args, "episodes", None) is not None:
        cfg = replace(cfg, train=replace(cfg.train, episodes=args.episodes))
    return cfg


DATA_ERRORS = (LexiconError, CorpusError, ParseFailure, InductionError,
               SimulatorError, LearnerError, LexiconMismatch, RecordTypeError)


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _configure(args)
        if args.command == "induce":
            cmd_induce(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "variants":
            cmd_variants(cfg, args.n, args.seed)
        elif args.command == "chat":
            return cmd_chat(cfg)
        elif args.command == "serve":
            return cmd_serve(cfg, args.host, args.port, args.delay, args.static)
        return EXIT_OK
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DATA_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except Exception as err:  # pragma: no cover - last-resort mapping
        print(f"unexpected error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
