"""Experiment specs, seed derivation and the on-disk artifacts behind the CLI.

An experiment spec is a flat ``key = value`` text file. Values are parsed as
JSON when possible (numbers, booleans, lists, objects) and kept as bare
strings otherwise; ``#`` starts a comment line::

    name = F_EIG
    data = synthetic
    synth_n = 2000
    split = [0.5, 0.125, 0.125, 0.25]
    criteria = ["CE", "FI", "FG"]
    generations = 30
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as D
from .ensemble import EnsembleSpec, evaluate_ensemble, read_manifest, select, write_manifest, Ensemble
from .errors import ConfigurationError, ReportError
from .evolve import RunConfig, RunHistory, read_population, run, write_population
from .fairmetrics import REPRESENTATIVE, check_criteria, evaluate
from .indicators import (
    TrialArchive,
    VERDICT_SYMBOL,
    build_pseudo_front,
    cpf,
    dominate_metric,
    dominated_metric,
    g_mean,
    hypervolume_with_error,
    incomparable_metric,
    normalize,
    rank_sum_test,
)
from .moea import SRAConfig, VariationSpec
from .nnet import NetSpec, TrainSpec

log = logging.getLogger(__name__)

DEFAULTS = {
    "name": "run",
    "data": "synthetic",
    "synth_n": 2000,
    "synth_d": 5,
    "synth_bias": 0.3,
    "synth_seed": 0,
    "label": "label",
    "sensitive": ["s"],
    "privileged": ["1"],
    "buckets": {},
    "drop_sensitive": False,
    "standardize": True,
    "split_per_trial": False,
    "split": [0.6, 0.2, 0.2],
    "criteria": ["CE", "FI", "FG"],
    "report_criteria": [],
    "generations": 200,
    "population": 100,
    "K": 10,
    "hidden": 64,
    "activation": "relu",
    "learning_rate": 0.004,
    "batch_size": 40,
    "epochs_per_partial": 1,
    "sigma": 0.01,
    "crossover_prob": 1.0,
    "mutation_prob": 1.0,
    "alpha": 2.0,
    "pc_min": 0.4,
    "pc_max": 0.6,
    "seed": 0,
    "trials": 1,
    "checkpoint_every": 0,
    "hv_samples": 1_000_000,
    "cpf_samples": 10_000,
    "output": "runs",
}

ENSEMBLE_METRICS = ("ACC", *REPRESENTATIVE)


# ---------------------------------------------------------------------------
# spec handling
# ---------------------------------------------------------------------------

def parse_spec_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value.strip("\"'")
    return out


@dataclass
class ExperimentSpec:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = sorted(set(self.values) - set(DEFAULTS))
        if unknown:
            raise ConfigurationError(f"unknown spec keys: {unknown}")
        self.values = {**DEFAULTS, **self.values}
        v = self.values
        if int(v["trials"]) < 1:
            raise ConfigurationError("trials must be >= 1")
        check_criteria(v["criteria"])
        check_criteria(v["report_criteria"] or v["criteria"])
        D.SplitSpec(tuple(v["split"]))

    @classmethod
    def from_file(cls, path) -> ExperimentSpec:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"no such spec file: {path}")
        return cls(parse_spec_text(path.read_text(encoding="utf-8")))

    def __getitem__(self, key):
        return self.values[key]

    def canonical(self) -> str:
        return json.dumps(self.values, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def run_config(self, input_dim: int, seed: int) -> RunConfig:
        v = self.values
        return RunConfig(
            net=NetSpec(input_dim, int(v["hidden"]), v["activation"]),
            train_spec=TrainSpec(float(v["learning_rate"]), int(v["batch_size"]), int(v["epochs_per_partial"])),
            vspec=VariationSpec(float(v["sigma"]), float(v["crossover_prob"]), float(v["mutation_prob"])),
            K=int(v["K"]),
            criteria=tuple(v["criteria"]),
            report_criteria=tuple(v["report_criteria"]),
            generations=int(v["generations"]),
            lam=int(v["population"]),
            alpha=float(v["alpha"]),
            seed=seed,
            checkpoint_every=int(v["checkpoint_every"]),
            sra=SRAConfig((float(v["pc_min"]), float(v["pc_max"]))),
        )


def derive_seed(master: int, counter: int, purpose: str = "trial") -> int:
    """Counter-hash seed derivation: stable across platforms and processes."""
    digest = hashlib.sha256(f"{master}:{purpose}:{counter}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def split_seed_for(spec: ExperimentSpec, trial: int) -> int:
    """One shared split for every trial unless ``split_per_trial`` is set.

    A shared split keeps the pooled reference front meaningful: objective
    values from different test sets are not comparable point by point.
    """
    return derive_seed(int(spec["seed"]), trial if spec["split_per_trial"] else 0, "split")


@dataclass
class Splits:
    parts: dict[str, D.Dataset]
    groups: dict[str, D.GroupPartition]

    def __getitem__(self, name):
        return self.parts[name], self.groups[name]


def load_dataset(spec: ExperimentSpec) -> D.Dataset:
    v = spec.values
    if v["data"] == "synthetic":
        return D.synth_biased(int(v["synth_n"]), int(v["synth_d"]), float(v["synth_bias"]), int(v["synth_seed"]))
    return D.load_csv(v["data"], v["label"], list(v["sensitive"]), v["buckets"], not v["drop_sensitive"])


def prepare_splits(spec: ExperimentSpec, split_seed: int, ds: D.Dataset | None = None) -> Splits:
    ds = load_dataset(spec) if ds is None else ds
    sspec = D.SplitSpec(tuple(spec["split"]), split_seed)
    parts = D.split(ds, sspec)
    if spec["standardize"]:
        parts = D.standardize(*parts)
    attrs = list(spec["sensitive"])
    priv = [str(p) for p in spec["privileged"]]
    named = dict(zip(sspec.part_names, parts))
    return Splits(named, {k: D.make_groups(p, attrs, priv) for k, p in named.items()})


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _provenance(spec: ExperimentSpec, seed: int) -> dict:
    return {"spec_hash": spec.hash, "seed": seed}


def run_indicators(objectives: list[np.ndarray], hv_samples: int, cpf_samples: int):
    """Per-generation HV and CPF against the run's own pooled front."""
    front = build_pseudo_front(objectives)
    rows = []
    for gen, F in enumerate(objectives):
        N = normalize(F, front)
        hv, se = hypervolume_with_error(N, n_samples=hv_samples, seed=gen)
        rows.append((gen, "HV", hv, se))
        rows.append((gen, "CPF", cpf(F, front, cpf_samples, seed=gen), 0.0))
    return rows


def write_indicator_rows(path, rows, run_id: str, provenance: dict):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "generation", "indicator", "value", "stderr", *provenance])
        for gen, name, value, se in rows:
            w.writerow([run_id, gen, name, repr(float(value)), repr(float(se)), *provenance.values()])


def train_trial(spec: ExperimentSpec, trial: int, out_dir: Path) -> Path:
    seed = derive_seed(int(spec["seed"]), trial)
    split_seed = split_seed_for(spec, trial)
    splits = prepare_splits(spec, split_seed)
    train, tpart = splits["train"]
    val, vpart = splits["validation"]
    test, spart = splits["test"]
    cfg = spec.run_config(train.dim, seed)
    pop, hist = run(cfg, train, val, tpart, vpart)

    tdir = out_dir / f"trial_{trial:03d}"
    tdir.mkdir(parents=True, exist_ok=True)
    prov = _provenance(spec, seed)
    hist.write_csv(tdir / "history.csv", prov)
    write_population(tdir / "population.jsonl", pop, hist.columns, {**prov, "trial": trial, "split_seed": split_seed})

    test_F = np.array([evaluate(m.genome, cfg.net, test, spart, hist.columns, cfg.alpha) for m in pop.members])
    with (tdir / "final_test.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["individual", *hist.columns, *prov])
        for i, row in enumerate(test_F):
            w.writerow([i, *(repr(float(x)) for x in row), *prov.values()])

    rows = run_indicators(hist.objectives, int(spec["hv_samples"]), int(spec["cpf_samples"]))
    write_indicator_rows(tdir / "indicators.csv", rows, f"{spec['name']}/{trial}", prov)
    (tdir / "run.json").write_text(json.dumps({
        **prov, "trial": trial, "split_seed": split_seed,
        "generation_seeds": hist.seeds, "wall_times": hist.wall_times,
    }, indent=1))
    log.info("trial %d finished: %d generations", trial, cfg.generations)
    return tdir


def _train_trial_job(args):
    values, trial, out_dir = args
    return train_trial(ExperimentSpec(values), trial, Path(out_dir))


def cmd_train(spec: ExperimentSpec, output: str | None = None, jobs: int = 1) -> Path:
    out_dir = Path(output or spec["output"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "spec.json").write_text(json.dumps({"spec_hash": spec.hash, "spec": spec.values}, indent=1,
                                                  sort_keys=True))
    jobs_args = [(spec.values, t, str(out_dir)) for t in range(int(spec["trials"]))]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            list(ex.map(_train_trial_job, jobs_args))
    else:
        for a in jobs_args:
            _train_trial_job(a)
    return out_dir


def load_experiment_spec(run_dir) -> ExperimentSpec:
    run_dir = Path(run_dir)
    for cand in (run_dir / "spec.json", run_dir.parent / "spec.json"):
        if cand.exists():
            return ExperimentSpec(json.loads(cand.read_text())["spec"])
    raise ConfigurationError(f"no spec.json found for {run_dir}")


# ---------------------------------------------------------------------------
# ensemble
# ---------------------------------------------------------------------------

def _write_table(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_ensemble(trial_dir, strategies=("EnsAll",), size: int = 50, criteria=None,
                 metrics=ENSEMBLE_METRICS) -> list[Path]:
    """Build ensembles from a trial's final population and score them on the test split.

    Selection uses the ``ensemble`` split when the spec has four parts and the
    validation split otherwise.
    """
    trial_dir = Path(trial_dir)
    pop_path = trial_dir / "population.jsonl"
    if not pop_path.exists():
        raise ConfigurationError(f"no population dump in {trial_dir}")
    spec = load_experiment_spec(trial_dir)
    meta, genomes, _ = read_population(pop_path)
    splits = prepare_splits(spec, int(meta["split_seed"]))
    ens_name = "ensemble" if "ensemble" in splits.parts else "validation"
    ens_ds, ens_part = splits[ens_name]
    test, tpart = splits["test"]
    net = NetSpec(test.dim, int(spec["hidden"]), spec["activation"])
    alpha = float(spec["alpha"])
    criteria = tuple(criteria or spec["criteria"])
    metrics = check_criteria(metrics)
    prov = {"spec_hash": meta.get("spec_hash", spec.hash), "seed": meta.get("seed")}

    outputs = []
    for strategy in strategies:
        espec = EnsembleSpec(strategy, size, criteria, alpha)
        ens = select(genomes, net, ens_ds, ens_part, espec)
        manifest = trial_dir / f"ensemble_{strategy}.manifest.jsonl"
        write_manifest(manifest, ens, strategy, pop_path.name, prov)
        rows = []
        vec = evaluate_ensemble(ens, test, tpart, metrics, alpha)
        rows.append(["ensemble", -1, *(repr(float(x)) for x in vec), repr(g_mean(vec)), *prov.values()])
        for i in ens.indices:
            one = Ensemble([genomes[i]], net, [i])
            vec = evaluate_ensemble(one, test, tpart, metrics, alpha)
            rows.append(["member", i, *(repr(float(x)) for x in vec), repr(g_mean(vec)), *prov.values()])
        report = trial_dir / f"ensemble_{strategy}.csv"
        _write_table(report, ["kind", "index", *metrics, "G_mean", *prov], rows)
        outputs.append(report)
    return outputs


def load_ensemble(manifest_path) -> Ensemble:
    manifest_path = Path(manifest_path)
    meta, indices = read_manifest(manifest_path)
    _, genomes, _ = read_population(manifest_path.parent / meta["population"])
    return Ensemble([genomes[i] for i in indices], NetSpec(**meta["net"]), indices)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass
class ExperimentRuns:
    name: str
    spec: ExperimentSpec
    histories: list[RunHistory]
    finals_test: list[np.ndarray]
    columns: tuple[str, ...]


def _read_final_test(path, columns):
    with Path(path).open(newline="") as fh:
        return np.array([[float(r[c]) for c in columns] for r in csv.DictReader(fh)])


def load_runs(run_dir) -> ExperimentRuns:
    run_dir = Path(run_dir)
    spec = load_experiment_spec(run_dir)
    trials = sorted(p for p in run_dir.glob("trial_*") if p.is_dir())
    if not trials:
        raise ReportError(f"{run_dir} has no trial directories")
    hists = [RunHistory.read_csv(t / "history.csv") for t in trials]
    cols = hists[0].columns
    if any(h.columns != cols for h in hists):
        raise ReportError(f"trials in {run_dir} disagree on criteria")
    finals = [_read_final_test(t / "final_test.csv", cols) for t in trials]
    return ExperimentRuns(str(spec["name"]), spec, hists, finals, cols)


def cmd_report(run_dirs, out_dir, baseline=None, reference: str | None = None, alpha_sig: float = 0.05,
               hv_samples: int | None = None, cpf_samples: int | None = None) -> Path:
    """Pooled-front HV/CPF curves, final-generation verdicts and, with a
    baseline file, the dominate/incomparable/dominated table."""
    exps = [load_runs(d) for d in run_dirs]
    if not exps:
        raise ReportError("report needs at least one run directory")
    cols = exps[0].columns
    for e in exps:
        if e.columns != cols:
            raise ReportError(f"incompatible criteria: {e.name} has {e.columns}, expected {cols}")
    names = [e.name for e in exps]
    if len(set(names)) != len(names):
        names = [f"{n}#{i}" for i, n in enumerate(names)]
    hv_samples = hv_samples or int(exps[0].spec["hv_samples"])
    cpf_samples = cpf_samples or int(exps[0].spec["cpf_samples"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    front = build_pseudo_front([F for e in exps for h in e.histories for F in h.objectives])
    hashes = ";".join(sorted({e.spec.hash for e in exps}))
    seeds = ";".join(str(e.spec["seed"]) for e in exps)

    curve_rows, final_rows = [], []
    finals: dict[str, dict[str, list[float]]] = {}
    for name, e in zip(names, exps):
        per_gen: dict[tuple[int, str], list[float]] = {}
        for t, h in enumerate(e.histories):
            for gen, F in enumerate(h.objectives):
                N = normalize(F, front)
                hv, se = hypervolume_with_error(N, n_samples=hv_samples, seed=gen)
                c = cpf(F, front, cpf_samples, seed=gen)
                per_gen.setdefault((gen, "HV"), []).append(hv)
                per_gen.setdefault((gen, "CPF"), []).append(c)
                if gen == len(h.objectives) - 1:
                    final_rows.append([name, t, "HV", repr(hv), repr(se), hashes, seeds])
                    final_rows.append([name, t, "CPF", repr(c), "0.0", hashes, seeds])
                    finals.setdefault(name, {}).setdefault("HV", []).append(hv)
                    finals[name].setdefault("CPF", []).append(c)
        for (gen, ind), vals in sorted(per_gen.items()):
            curve_rows.append([name, gen, ind, repr(float(np.mean(vals))), repr(float(np.std(vals))), len(vals),
                               hashes, seeds])
    _write_table(out / "curves.csv", ["algorithm", "generation", "indicator", "mean", "std", "n", "spec_hashes", "master_seeds"],
                 curve_rows)
    _write_table(out / "final.csv", ["algorithm", "trial", "indicator", "value", "stderr", "spec_hashes", "master_seeds"],
                 final_rows)

    ref = reference or names[0]
    if ref not in finals:
        raise ReportError(f"reference {ref!r} not among {names}")
    verdict_rows = []
    for name in names:
        if name == ref:
            continue
        for ind in ("HV", "CPF"):
            a, b = finals[name][ind], finals[ref][ind]
            if len(a) < 3 or len(b) < 3:
                verdict, sym = "n/a", ""
            else:
                verdict = rank_sum_test(a, b, alpha_sig)
                sym = VERDICT_SYMBOL[verdict]
            verdict_rows.append([name, ref, ind, repr(float(np.mean(a))), repr(float(np.mean(b))), verdict, sym,
                                 hashes, seeds])
    _write_table(out / "verdicts.csv",
                 ["algorithm", "reference", "indicator", "mean", "reference_mean", "verdict", "symbol",
                  "spec_hashes", "master_seeds"], verdict_rows)

    if baseline is not None:
        ref_exp = exps[names.index(ref)]
        with Path(baseline).open(newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in cols if c not in (reader.fieldnames or [])]
            if missing:
                raise ReportError(f"baseline file lacks columns {missing}")
            solutions = [np.array([float(r[c]) for c in cols]) for r in reader]
        rows = []
        for k, s in enumerate(solutions):
            arch = TrialArchive(ref_exp.finals_test, s)
            rows.append([k, repr(dominate_metric(arch)), repr(incomparable_metric(arch)),
                         repr(dominated_metric(arch)), ref, hashes, seeds])
        _write_table(out / "dominance.csv",
                     ["baseline", "Dominate", "Incomparable", "Dominated", "reference", "spec_hashes", "master_seeds"], rows)
    return out
