"""Experiment sweeps: grid expansion, the per-cell pipeline, persistence.

A sweep walks the grid (training size x exception proportion x epoch
setting), and for each cell generates a corpus and test pairs, trains a
tokenizer on the cell's text, trains one model per replicate (replicates
differ only in their weight-initialization seed), evaluates on minimal
pairs, and appends one aggregated row to an append-only CSV store.
"""

from __future__ import annotations

import fcntl
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import bpe, corpora
from .checkpoint import save_checkpoint, state_digest
from .corpora import BINARY, WORD_ORDER
from .model import ModelConfig, TrainConfig, init_model
from .scoring import MODES, PLL, evaluate_pairs
from .tp import above_chance_test
from .training import train
from .util import sha256_bytes, stable_seed

CSV_HEADER = (
    "experiment,n_train,exception_prop,epochs,replicates,seeds,accuracies,"
    "mean_accuracy,n_types,above_chance_p,surprisal_mode,corpus_hash,wall_seconds"
)
# wall_seconds is the only column allowed to differ between identical runs
TIMING_COLUMNS = ("wall_seconds",)

CONFIG_FORMAT = "quantal-sweep v1"
MANIFEST_FORMAT = "quantal-manifest v1"

EXP1_VOCAB_WORDS = 10_000
WORD_LEN_RANGE = (3, 13)
STRING_LEN = 16
TARGET_VOCAB = {WORD_ORDER: 4096, BINARY: 32}

DEFAULT_EPOCHS = (4, 10)
DEFAULT_SIZES = {
    WORD_ORDER: (1000, 2000, 4000, 6000, 8000, 10000),
    BINARY: (100, 200, 300, 400, 500),
}
DEFAULT_PROPORTIONS = {
    WORD_ORDER: (0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30),
    BINARY: (0.0, 0.1, 0.2, 0.3, 0.4, 0.5),
}
DEFAULT_REPLICATES = {WORD_ORDER: 1, BINARY: 3}


@dataclass(frozen=True)
class SweepConfig:
    experiment: str
    sizes: tuple[int, ...]
    proportions: tuple[float, ...]
    epoch_settings: tuple[int, ...]
    replicates: int
    base_seed: int
    n_test_pairs: int = 1000
    surprisal_mode: str = PLL

    def __post_init__(self):
        if self.experiment not in (WORD_ORDER, BINARY):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        for name in ("sizes", "proportions", "epoch_settings"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        if any(n < 1 for n in self.sizes):
            raise ValueError("sizes must be >= 1")
        if any(not 0.0 <= p <= 1.0 for p in self.proportions):
            raise ValueError("proportions must lie in [0, 1]")
        if any(e < 1 for e in self.epoch_settings):
            raise ValueError("epoch_settings must be >= 1")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be unsigned")
        if self.n_test_pairs < 1:
            raise ValueError("n_test_pairs must be >= 1")
        if self.surprisal_mode not in MODES:
            raise ValueError(f"surprisal_mode must be one of {MODES}")


def default_config(experiment: str, base_seed: int, **overrides) -> SweepConfig:
    """Full default grid for one experiment; keyword overrides welcome."""
    fields = dict(
        experiment=experiment,
        sizes=DEFAULT_SIZES[experiment],
        proportions=DEFAULT_PROPORTIONS[experiment],
        epoch_settings=DEFAULT_EPOCHS,
        replicates=DEFAULT_REPLICATES[experiment],
        base_seed=base_seed,
    )
    fields.update(overrides)
    return SweepConfig(**fields)


@dataclass(frozen=True)
class CellJob:
    """One replicate of one grid cell."""

    experiment: str
    n_train: int
    exception_prop: float
    epochs: int
    cell_index: int
    replicate_index: int
    init_seed: int


@dataclass(frozen=True)
class SweepCellResult:
    experiment: str
    n_train: int
    exception_prop: float
    epochs: int
    seeds: tuple[int, ...]
    accuracies: tuple[float, ...]
    mean_accuracy: float
    n_types: int
    above_chance_p: float
    surprisal_mode: str
    corpus_hash: str
    tokenizer_hash: str
    checkpoint_hashes: tuple[str, ...]
    wall_seconds: float

    def __post_init__(self):
        if not len(self.seeds) == len(self.accuracies) == len(self.checkpoint_hashes):
            raise ValueError("per-replicate fields must have equal length")
        if abs(self.mean_accuracy - float(np.mean(self.accuracies))) > 1e-12:
            raise ValueError("mean_accuracy is not the mean of accuracies")

    @property
    def replicates(self) -> int:
        return len(self.seeds)


def expand_grid(cfg: SweepConfig) -> list[CellJob]:
    """One job per (cell, replicate), with seeds stable across runs.

    Cells enumerate sizes, then proportions, then epoch settings; the
    replicate seed is a hash of (base_seed, cell index, replicate index).
    """
    jobs = []
    cell_index = 0
    for n_train in cfg.sizes:
        for prop in cfg.proportions:
            for epochs in cfg.epoch_settings:
                for r in range(cfg.replicates):
                    jobs.append(
                        CellJob(
                            experiment=cfg.experiment,
                            n_train=n_train,
                            exception_prop=prop,
                            epochs=epochs,
                            cell_index=cell_index,
                            replicate_index=r,
                            init_seed=stable_seed(cfg.base_seed, cell_index, r),
                        )
                    )
                cell_index += 1
    if not jobs:
        raise ValueError("grid expansion produced no jobs")
    return jobs


def group_cells(jobs: list[CellJob]) -> list[list[CellJob]]:
    """Jobs regrouped into per-cell lists, replicate order preserved."""
    groups: dict[int, list[CellJob]] = {}
    for job in jobs:
        groups.setdefault(job.cell_index, []).append(job)
    return [groups[i] for i in sorted(groups)]


def derived_seeds(cfg: SweepConfig, job: CellJob) -> dict[str, int]:
    """Non-replicate seeds for a cell.

    The corpus, vocabulary, and test-pair seeds ignore the epoch setting
    on purpose: the 4- and 10-epoch cells for a (size, proportion) train
    on the same data and evaluate on the same pairs.  The shuffle/mask
    stream is shared across replicates so that replicates differ only in
    their initial weights.
    """
    tag = (cfg.experiment, job.n_train, repr(job.exception_prop))
    return {
        "vocab_seed": stable_seed(cfg.base_seed, "vocab", *tag),
        "corpus_seed": stable_seed(cfg.base_seed, "corpus", *tag),
        "pairs_seed": stable_seed(cfg.base_seed, "pairs", *tag),
        "train_seed": stable_seed(cfg.base_seed, "train", job.cell_index),
    }


def _cell_inputs(cfg: SweepConfig, job: CellJob):
    seeds = derived_seeds(cfg, job)
    if cfg.experiment == WORD_ORDER:
        vocab = corpora.gen_vocabulary(
            EXP1_VOCAB_WORDS, *WORD_LEN_RANGE, seed=seeds["vocab_seed"]
        )
        corpus = corpora.gen_exp1_corpus(
            vocab, job.n_train, job.exception_prop, seed=seeds["corpus_seed"]
        )
        pairs = corpora.gen_exp1_test_pairs(vocab, cfg.n_test_pairs, seed=seeds["pairs_seed"])
        tok_texts = ["".join(w + "\n" for w in vocab.words), corpus.to_text()]
    else:
        corpus = corpora.gen_exp2_corpus(
            job.n_train, job.exception_prop, string_len=STRING_LEN, seed=seeds["corpus_seed"]
        )
        pairs = corpora.gen_exp2_test_pairs(
            cfg.n_test_pairs, string_len=STRING_LEN, seed=seeds["pairs_seed"]
        )
        tok_texts = [corpus.to_text()]
    tok = bpe.train_tokenizer(tok_texts, TARGET_VOCAB[cfg.experiment])
    return seeds, corpus, pairs, tok


def run_cell(
    cfg: SweepConfig, jobs: list[CellJob], artifacts_dir: str | Path | None = None
) -> SweepCellResult:
    """Generate, tokenize, train each replicate, evaluate, and aggregate.

    With artifacts_dir set, the corpus/pairs/tokenizer/checkpoint files
    are written there for later inspection; hashes are recorded either way.
    """
    if not jobs:
        raise ValueError("run_cell needs at least one job")
    if len({(j.cell_index) for j in jobs}) != 1:
        raise ValueError("jobs must all belong to one cell")
    t0 = time.perf_counter()
    job = jobs[0]
    seeds, corpus, pairs, tok = _cell_inputs(cfg, job)

    accuracies = []
    ckpt_hashes = []
    states = []
    for j in sorted(jobs, key=lambda j: j.replicate_index):
        state = init_model(ModelConfig(vocab_size=tok.vocab_size), seed=j.init_seed)
        train(state, corpus, tok, TrainConfig(epochs=j.epochs, seed=seeds["train_seed"]))
        report = evaluate_pairs(state, tok, pairs, mode=cfg.surprisal_mode)
        accuracies.append(report.accuracy)
        ckpt_hashes.append(state_digest(state))
        states.append(state)

    mean_accuracy = float(np.mean(accuracies))
    result = SweepCellResult(
        experiment=cfg.experiment,
        n_train=job.n_train,
        exception_prop=job.exception_prop,
        epochs=job.epochs,
        seeds=tuple(j.init_seed for j in sorted(jobs, key=lambda j: j.replicate_index)),
        accuracies=tuple(accuracies),
        mean_accuracy=mean_accuracy,
        n_types=corpus.n_types,
        above_chance_p=above_chance_test(
            mean_accuracy * cfg.n_test_pairs, cfg.n_test_pairs
        ),
        surprisal_mode=cfg.surprisal_mode,
        corpus_hash=sha256_bytes(corpus.to_text().encode("utf-8")),
        tokenizer_hash=sha256_bytes(bpe.save_tokenizer_text(tok).encode("utf-8")),
        checkpoint_hashes=tuple(ckpt_hashes),
        wall_seconds=time.perf_counter() - t0,
    )
    if artifacts_dir is not None:
        _write_artifacts(Path(artifacts_dir), cfg, result, seeds, corpus, pairs, tok, states)
    return result


def _cell_stem(result: SweepCellResult) -> str:
    return (
        f"{result.experiment}_n{result.n_train}_p{result.exception_prop}"
        f"_e{result.epochs}"
    )


def _write_artifacts(root, cfg, result, seeds, corpus, pairs, tok, states) -> None:
    stem = _cell_stem(result)
    cell_dir = root / stem
    cell_dir.mkdir(parents=True, exist_ok=True)
    corpora.write_corpus(corpus, cell_dir / "corpus.txt")
    corpora.write_pairs(pairs, cell_dir / "pairs.tsv")
    bpe.save_tokenizer(tok, cell_dir / "tokenizer.txt")
    for r, state in enumerate(states):
        save_checkpoint(
            state,
            cell_dir / f"replicate{r}.ckpt",
            train_config=TrainConfig(epochs=result.epochs, seed=seeds["train_seed"]),
            tokenizer_sha256=result.tokenizer_hash,
        )
    write_manifest(cell_dir / "manifest.json", cfg, result, seeds)


def write_manifest(path: str | Path, cfg: SweepConfig, result: SweepCellResult, seeds) -> None:
    """Config snapshot plus every seed and hash needed for exact replay."""
    payload = {
        "format": MANIFEST_FORMAT,
        "config": asdict(cfg),
        "cell": asdict(result),
        "derived_seeds": dict(seeds),
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def result_to_row(result: SweepCellResult) -> dict:
    """The CSV-visible view of a result, keyed by header column."""
    return {
        "experiment": result.experiment,
        "n_train": result.n_train,
        "exception_prop": result.exception_prop,
        "epochs": result.epochs,
        "replicates": result.replicates,
        "seeds": result.seeds,
        "accuracies": result.accuracies,
        "mean_accuracy": result.mean_accuracy,
        "n_types": result.n_types,
        "above_chance_p": result.above_chance_p,
        "surprisal_mode": result.surprisal_mode,
        "corpus_hash": result.corpus_hash,
        "wall_seconds": result.wall_seconds,
    }


def _format_row(result: SweepCellResult) -> str:
    row = result_to_row(result)
    fields = [
        row["experiment"],
        str(row["n_train"]),
        repr(row["exception_prop"]),
        str(row["epochs"]),
        str(row["replicates"]),
        ";".join(str(s) for s in row["seeds"]),
        ";".join(repr(a) for a in row["accuracies"]),
        repr(row["mean_accuracy"]),
        str(row["n_types"]),
        repr(row["above_chance_p"]),
        row["surprisal_mode"],
        row["corpus_hash"],
        f"{row['wall_seconds']:.3f}",
    ]
    for field in fields:
        if "," in field or "\n" in field:
            raise ValueError(f"field not CSV-safe: {field!r}")
    return ",".join(fields)


def append_result(store: str | Path, result: SweepCellResult) -> None:
    """Append one row under an exclusive lock, writing the header first.

    Concurrent appends from separate processes serialize on the lock, so
    rows never interleave.
    """
    line = _format_row(result)
    with open(store, "a+", encoding="utf-8") as f:
        fcntl.flock(f.fileno(), fcntl.LOCK_EX)
        try:
            f.seek(0)
            first = f.readline().rstrip("\n")
            if first and first != CSV_HEADER:
                raise ValueError(f"store has a different schema: {store}")
            f.seek(0, 2)
            if f.tell() == 0:
                f.write(CSV_HEADER + "\n")
            f.write(line + "\n")
            f.flush()
        finally:
            fcntl.flock(f.fileno(), fcntl.LOCK_UN)


def load_results(store: str | Path) -> list[dict]:
    """Rows parsed back to numbers and tuples; missing store = empty table."""
    path = Path(store)
    if not path.exists():
        return []
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        return []
    if lines[0] != CSV_HEADER:
        raise ValueError(f"store has a different schema: {store}")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(CSV_HEADER.split(",")):
            raise ValueError(f"malformed row: {line!r}")
        rows.append(
            {
                "experiment": parts[0],
                "n_train": int(parts[1]),
                "exception_prop": float(parts[2]),
                "epochs": int(parts[3]),
                "replicates": int(parts[4]),
                "seeds": tuple(int(s) for s in parts[5].split(";")),
                "accuracies": tuple(float(a) for a in parts[6].split(";")),
                "mean_accuracy": float(parts[7]),
                "n_types": int(parts[8]),
                "above_chance_p": float(parts[9]),
                "surprisal_mode": parts[10],
                "corpus_hash": parts[11],
                "wall_seconds": float(parts[12]),
            }
        )
    return rows


def column_slice(table: list[dict], n_train: int, epochs: int) -> list[tuple[float, float]]:
    """(exception_prop, mean_accuracy) points at fixed size and epochs.

    Sorted by proportion; repeated proportions (re-runs) are all kept,
    which downstream analysis treats as replicate measurements.
    """
    points = [
        (row["exception_prop"], row["mean_accuracy"])
        for row in table
        if row["n_train"] == n_train and row["epochs"] == epochs
    ]
    if not points:
        raise ValueError(f"no rows at n_train={n_train}, epochs={epochs}")
    return sorted(points)


def save_sweep_config(cfg: SweepConfig, path: str | Path) -> None:
    payload = {"format": CONFIG_FORMAT, **asdict(cfg)}
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_sweep_config(path: str | Path) -> SweepConfig:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.pop("format", None) != CONFIG_FORMAT:
        raise ValueError(f"not a {CONFIG_FORMAT!r} file: {path}")
    payload["sizes"] = tuple(payload["sizes"])
    payload["proportions"] = tuple(payload["proportions"])
    payload["epoch_settings"] = tuple(payload["epoch_settings"])
    return SweepConfig(**payload)


def _cell_key(row_or_result) -> tuple:
    get = row_or_result.get if isinstance(row_or_result, dict) else (
        lambda k: getattr(row_or_result, k)
    )
    return (
        get("experiment"),
        get("n_train"),
        get("exception_prop"),
        get("epochs"),
        get("replicates"),
        get("surprisal_mode"),
    )


def _cell_task(cfg: SweepConfig, jobs: list[CellJob], artifacts_dir):
    return run_cell(cfg, jobs, artifacts_dir=artifacts_dir)


def run_sweep(
    cfg: SweepConfig,
    store: str | Path,
    artifacts_dir: str | Path | None = None,
    workers: int = 1,
    reuse: bool = False,
    log=None,
):
    """Run every cell of the grid, appending rows as cells finish.

    Cells are independent: one failure is recorded and the rest proceed.
    With reuse=True, cells whose key already appears in the store are
    skipped, which makes interrupted sweeps resumable.  Returns
    (results, skipped, failures); failures hold (cell label, error text).
    """
    groups = group_cells(expand_grid(cfg))
    done = {_cell_key(row) for row in load_results(store)} if reuse else set()
    results, skipped, failures = [], [], []

    def label(jobs):
        j = jobs[0]
        return f"{j.experiment} n={j.n_train} prop={j.exception_prop} epochs={j.epochs}"

    pending = []
    for jobs in groups:
        j = jobs[0]
        key = (cfg.experiment, j.n_train, j.exception_prop, j.epochs, len(jobs), cfg.surprisal_mode)
        if key in done:
            skipped.append(label(jobs))
            if log:
                log(f"skip {label(jobs)} (already in store)")
            continue
        pending.append(jobs)

    def finish(jobs, result):
        append_result(store, result)
        results.append(result)
        if log:
            log(
                f"done {label(jobs)}: mean accuracy {result.mean_accuracy:.3f} "
                f"(p={result.above_chance_p:.3g}, {result.wall_seconds:.0f}s)"
            )

    if workers <= 1:
        for jobs in pending:
            try:
                finish(jobs, _cell_task(cfg, jobs, artifacts_dir))
            except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
                failures.append((label(jobs), repr(exc)))
                if log:
                    log(f"FAILED {label(jobs)}: {exc!r}")
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(jobs, pool.submit(_cell_task, cfg, jobs, artifacts_dir)) for jobs in pending]
            for jobs, fut in futures:
                try:
                    finish(jobs, fut.result())
                except Exception as exc:  # noqa: BLE001
                    failures.append((label(jobs), repr(exc)))
                    if log:
                        log(f"FAILED {label(jobs)}: {exc!r}")
    return results, skipped, failures
