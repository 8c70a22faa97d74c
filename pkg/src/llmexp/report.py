"""Campaign configuration, analysis of persisted transcripts, and report files.

Outputs of :func:`write_report` (all under ``<campaign>/analysis``):

* ``report.json``   machine-readable report; every figure in the markdown is here
* ``report.md``     human-readable summary
* ``cdf.csv``       ``model,case,condition,value,cumulative_fraction``
* ``invalid_rates.csv``  invalid replies per class and condition
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .budget_tasks import DOMAINS, TaskGenConfig
from .games import SCENARIOS
from .llm_runtime.client import ProviderConfig
from .llm_runtime.campaign import load_campaign
from .llm_runtime.simulation import INVALID_CLASSES, SimulationResult
from .prompts import Condition
from .revealed_pref import ChoiceDataset, agent_rng, ccei, random_allocations
from .stats import (
    ALPHA,
    PValueGrid,
    ecdf,
    load_published_values,
    load_reference_distribution,
    mean_diff_ci,
    normalized_std,
    sensitivity,
    t_test,
    turing_test,
)

DIGITS = 4
CASE_MEASURES = {"budget": DOMAINS, "games": SCENARIOS}


class ConfigError(ValueError):
    """Invalid campaign configuration; the message names the offending field."""


@dataclass
class ProviderEntry:
    name: str
    mock: str | None = None
    provider: ProviderConfig | None = None


@dataclass
class CampaignConfig:
    case: str
    measures: list[str]
    conditions: list[Condition]
    providers: list[ProviderEntry]
    n_sims: int = 100
    campaign_seed: int = 0
    output_dir: str = "campaign"
    parallelism: int = 1
    task: TaskGenConfig = field(default_factory=TaskGenConfig)
    max_retries_per_round: int = 10
    keep_invalid_context: bool = False
    references: dict[str, str] = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True, default=str).encode()).hexdigest()[:16]

    def provider(self, name: str) -> ProviderEntry:
        for p in self.providers:
            if p.name == name:
                return p
        raise ConfigError(f"providers: no provider named {name!r}")


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}{key}: required field is missing")
    return d[key]


def _int(v, where: str, minimum: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}")
    return v


def _conditions(entries, measures, where="conditions") -> list[Condition]:
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{where}: need a nonempty list of conditions")
    out, seen = [], set()
    for k, entry in enumerate(entries):
        loc = f"{where}[{k}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{loc}: expected a mapping")
        entry = dict(entry)
        only = entry.pop("cases", None)
        entry.setdefault("name", "baseline")
        entry.setdefault("variation", "baseline" if entry["name"] == "baseline" else entry["name"])
        if entry["name"] in seen:
            raise ConfigError(f"{loc}.name: duplicate condition name {entry['name']!r}")
        seen.add(entry["name"])
        for m in measures:
            if only is not None and m not in only:
                continue
            try:
                out.append(Condition.from_dict({**entry, "case": m}))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{loc}: {exc}") from exc
    return out


def _providers(entries) -> list[ProviderEntry]:
    if entries is None:
        return []
    if not isinstance(entries, list):
        raise ConfigError("providers: expected a list")
    out = []
    for k, entry in enumerate(entries):
        loc = f"providers[{k}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{loc}: expected a mapping")
        entry = dict(entry)
        name = entry.pop("name", None) or entry.get("model_id") or entry.get("mock")
        if not name:
            raise ConfigError(f"{loc}.name: required field is missing")
        mock = entry.pop("mock", None)
        if mock is not None:
            out.append(ProviderEntry(str(name), mock=str(mock)))
            continue
        _require(entry, "endpoint_url", f"{loc}.")
        _require(entry, "model_id", f"{loc}.")
        try:
            out.append(ProviderEntry(str(name), provider=ProviderConfig(name=str(name), **entry)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{loc}: {exc}") from exc
    return out


def parse_config(raw: dict, base_dir: str | Path = ".") -> CampaignConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    case = _require(raw, "case", "")
    if case not in CASE_MEASURES:
        raise ConfigError(f"case: expected one of {sorted(CASE_MEASURES)}, got {case!r}")
    measures = list(raw.get("measures") or CASE_MEASURES[case])
    bad = [m for m in measures if m not in CASE_MEASURES[case]]
    if bad:
        raise ConfigError(f"measures: {bad} do not belong to case {case!r}")
    base = Path(base_dir)
    refs = {}
    for key, path in (raw.get("references") or {}).items():
        p = Path(path)
        p = p if p.is_absolute() else base / p
        if not p.exists():
            raise ConfigError(f"references.{key}: file {str(p)!r} does not exist")
        refs[key] = str(p)
    try:
        task = TaskGenConfig(**(raw.get("task") or {}))
        task.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"task: {exc}") from exc
    return CampaignConfig(
        case=case,
        measures=measures,
        conditions=_conditions(raw.get("conditions", [{"name": "baseline"}]), measures),
        providers=_providers(raw.get("providers")),
        n_sims=_int(raw.get("n_sims", 100), "n_sims", 1),
        campaign_seed=_int(raw.get("campaign_seed", 0), "campaign_seed", 0),
        output_dir=str(raw.get("output_dir", "campaign")),
        parallelism=_int(raw.get("parallelism", 1), "parallelism", 1),
        task=task,
        max_retries_per_round=_int(raw.get("max_retries_per_round", 10), "max_retries_per_round", 1),
        keep_invalid_context=bool(raw.get("keep_invalid_context", False)),
        references=refs,
        raw=raw,
    )


def load_config(path: str | Path) -> CampaignConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    return parse_config(raw, base_dir=path.parent)


# ---------------------------------------------------------------- analysis


def _r(x):
    if x is None:
        return None
    x = float(x)
    if not np.isfinite(x):
        return str(x)
    return round(x, DIGITS)


def simulation_measure(res: SimulationResult) -> float | None:
    """CCEI for a budget simulation, the decision value for a game."""
    if not res.completed or not res.decisions:
        return None
    if res.condition.is_game:
        return float(res.decisions[0].value)
    return ccei(ChoiceDataset.from_allocations(res.rounds, res.decisions)).value


def _summary(values: list[float]) -> dict:
    x = np.asarray(values, dtype=float)
    return {
        "n": int(x.size),
        "mean": _r(x.mean()) if x.size else None,
        "std": _r(x.std(ddof=1)) if x.size > 1 else None,
        "min": _r(x.min()) if x.size else None,
        "max": _r(x.max()) if x.size else None,
    }


def _random_benchmark(results: list[SimulationResult], seed: int) -> dict:
    """Uniform-random agents on the campaign's own budget lines, one per task set."""
    out = {}
    for domain in DOMAINS:
        task_sets = {}
        for r in results:
            if r.condition.case == domain and r.rounds:
                key = tuple((b.return_a, b.return_b) for b in r.rounds)
                task_sets.setdefault(key, r.rounds)
        if not task_sets:
            continue
        values = []
        for i, key in enumerate(sorted(task_sets)):
            rounds = task_sets[key]
            allocs = random_allocations(agent_rng(seed, i), len(rounds))
            values.append(ccei(ChoiceDataset.from_allocations(rounds, allocs)).value)
        out[domain] = {**_summary(values), "values": values}
    return out


def analyze(campaign_dir: str | Path, references: dict[str, str] | None = None, *, alpha: float = ALPHA,
            turing_draws: int = 10_000, seed: int = 0, t_variant: str = "pooled") -> dict:
    """Build the analysis report for everything persisted under ``campaign_dir``."""
    campaign_dir = Path(campaign_dir)
    results = load_campaign(campaign_dir)
    manifest_path = campaign_dir / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    if not results:
        raise ValueError(f"{campaign_dir}: no completed simulations found")

    groups: dict[tuple[str, str, str], list[SimulationResult]] = defaultdict(list)
    for r in results:
        groups[(r.model_id, r.condition.case, r.condition.name)].append(r)
    conditions = {(r.model_id, r.condition.case, r.condition.name): r.condition for r in results}

    measures: dict[tuple, list[float]] = {}
    summaries = []
    invalid_rows = []
    for key in sorted(groups):
        model, case, name = key
        sims = groups[key]
        values = [v for v in map(simulation_measure, sims) if v is not None]
        measures[key] = values
        counts = {c: sum(s.invalid_count.get(c, 0) for s in sims) for c in INVALID_CLASSES}
        turns = sum(s.n_assistant_turns for s in sims)
        n_invalid = sum(counts.values())
        summaries.append({
            "model": model, "case": case, "condition": name, "variation": conditions[key].variation,
            "statistic": "game_decision" if conditions[key].is_game else "ccei",
            "n_simulations": len(sims), "n_completed": sum(s.completed for s in sims),
            **_summary(values),
            "invalid_rate": _r(n_invalid / turns) if turns else 0.0,
        })
        invalid_rows.append({"model": model, "case": case, "condition": name,
                             "assistant_turns": turns, "valid": turns - n_invalid, **counts,
                             "invalid_rate": _r(n_invalid / turns) if turns else 0.0})

    # condition versus baseline
    comparisons = []
    families: dict[str, dict] = defaultdict(dict)
    for key in sorted(groups):
        model, case, name = key
        if name == "baseline":
            continue
        base_key = (model, case, "baseline")
        if base_key not in groups:
            raise ValueError(f"missing baseline condition for model {model!r}, case {case!r}")
        a, b = measures[key], measures[base_key]
        row = {"model": model, "case": case, "condition": name, "variation": conditions[key].variation,
               "n": len(a), "n_baseline": len(b)}
        if len(a) < 2 or len(b) < 2:
            row["note"] = "too few completed simulations for a t-test"
            comparisons.append(row)
            continue
        t = t_test(a, b, variant=t_variant)
        lo, hi = mean_diff_ci(a, b, variant=t_variant) if t.std_error > 0 else (t.mean_difference,) * 2
        row.update(difference=_r(t.mean_difference), ci_low=_r(lo), ci_high=_r(hi),
                   t=_r(t.t_statistic), df=_r(t.degrees_of_freedom), p_raw=t.p_value)
        comparisons.append(row)
        families[row["variation"]][(model, case, name)] = t.p_value

    sensitivity_rows = []
    adjusted: dict[tuple, float] = {}
    for variation in sorted(families):
        grid = PValueGrid(families[variation], family_id=variation)
        adjusted.update(grid.adjusted)
        entry = {"variation": variation, "n_cells": len(grid.raw)}
        try:
            rep = sensitivity(grid, alpha)
        except ValueError as exc:
            entry["note"] = str(exc)
        else:
            entry.update(lambda_=_r(rep.lambda_), lambda_percent=round(100 * rep.lambda_, 1),
                         lambda_by_measure={m: _r(v) for m, v in rep.lambda_by_measure.items()},
                         n_significant=rep.n_significant, n_models=rep.n_models,
                         n_measures=rep.n_measures, n_conditions=rep.n_conditions)
        sensitivity_rows.append(entry)
    for row in comparisons:
        cell = (row["model"], row["case"], row["condition"])
        if cell in adjusted:
            row["p_raw"] = _r(row["p_raw"])
            row["p_adjusted"] = _r(adjusted[cell])
            row["significant"] = bool(adjusted[cell] < alpha)

    turing_rows = []
    refs = {}
    for label, path in sorted((references or {}).items()):
        loaded = load_reference_distribution(path)
        if not loaded or all(v.size == 0 for v in loaded.values()):
            raise ValueError(f"reference data {label!r} ({path}) is empty")
        refs.update(loaded)
    if references:
        rng = np.random.default_rng(seed)
        for key in sorted(groups):
            model, case, name = key
            if case not in refs or not measures[key]:
                continue
            out = turing_test(measures[key], refs[case], n_draws=turing_draws, rng=rng)
            turing_rows.append({"model": model, "case": case, "condition": name,
                                "p_llm_more_likely": _r(out.p_llm_more_likely), "p_equal": _r(out.p_equal),
                                "p_human_more_likely": _r(out.p_human_more_likely),
                                "passed": out.passed, "n_draws": out.n_draws})

    dispersion = []
    game_cells = defaultdict(dict)
    for (model, case, name), values in measures.items():
        if case in SCENARIOS and len(values) >= 2:
            game_cells[(model, name)][case] = values
    for (model, name) in sorted(game_cells):
        cells = game_cells[(model, name)]
        dispersion.append({"model": model, "condition": name, "scenarios": sorted(cells),
                           "normalized_std": _r(normalized_std(cells))})
    game_refs = {k: v for k, v in refs.items() if k in SCENARIOS and v.size >= 2}
    if game_refs:
        dispersion.append({"model": "human_reference", "condition": "baseline", "scenarios": sorted(game_refs),
                           "normalized_std": _r(normalized_std(game_refs))})

    campaign_seed = int(next(iter(manifest.get("runs", {}).values()), {}).get("campaign_seed", seed))
    bench = _random_benchmark(results, campaign_seed)
    benchmark = {}
    for domain, b in bench.items():
        entry = {k: v for k, v in b.items() if k != "values"}
        for key in sorted(groups):
            if key[1] == domain and key[2] == "baseline" and len(measures[key]) >= 2 and len(b["values"]) >= 2:
                t = t_test(measures[key], b["values"])
                entry.setdefault("vs_baseline", []).append({"model": key[0], "t": _r(t.t_statistic),
                                                            "p": _r(t.p_value)})
        benchmark[domain] = entry

    cdf_rows = []
    for key in sorted(measures):
        xs, fs = ecdf(measures[key])
        cdf_rows += [{"model": key[0], "case": key[1], "condition": key[2], "value": _r(x),
                      "cumulative_fraction": _r(f)} for x, f in zip(xs, fs)]
    for label, values in sorted(refs.items()):
        xs, fs = ecdf(values)
        cdf_rows += [{"model": "human_reference", "case": label, "condition": "baseline", "value": _r(x),
                      "cumulative_fraction": _r(f)} for x, f in zip(xs, fs)]
    if bench:
        for domain, b in sorted(bench.items()):
            xs, fs = ecdf(b["values"])
            cdf_rows += [{"model": "random_benchmark", "case": domain, "condition": "baseline", "value": _r(x),
                          "cumulative_fraction": _r(f)} for x, f in zip(xs, fs)]

    cases = {k[1] for k in groups}
    published = [p for p in load_published_values()
                 if p["measure"] in cases or p["measure"] == ("budget" if cases & set(DOMAINS) else "games")]

    return {
        "campaign": str(campaign_dir.name),
        "config_hashes": sorted({r.get("config_hash") for r in manifest.get("runs", {}).values()} - {None}),
        "alpha": alpha,
        "t_test": t_variant,
        "summaries": summaries,
        "comparisons": comparisons,
        "sensitivity": sensitivity_rows,
        "turing": turing_rows,
        "normalized_std": dispersion,
        "random_benchmark": benchmark,
        "invalid_rates": invalid_rows,
        "published": [{**p, "value": _r(p["value"])} for p in published],
        "cdf": cdf_rows,
    }


# ---------------------------------------------------------------- rendering


def _cell(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, list):
        return ", ".join(map(str, v))
    return str(v)


def _table(rows: list[dict], cols: list[str]) -> list[str]:
    if not rows:
        return ["(none)", ""]
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    lines += ["| " + " | ".join(_cell(r.get(c)) for c in cols) + " |" for r in rows]
    return lines + [""]


def render_markdown(report: dict) -> str:
    out = [f"# Analysis of campaign `{report['campaign']}`", ""]
    if report["config_hashes"]:
        out += [f"Config hash: {', '.join(report['config_hashes'])}", ""]
    out += ["## Per-condition summary", ""]
    out += _table(report["summaries"], ["model", "case", "condition", "statistic", "n", "mean", "std",
                                        "invalid_rate"])
    out += [f"## Condition versus baseline ({report['t_test']} t-test, alpha {report['alpha']})", ""]
    out += _table(report["comparisons"], ["model", "case", "condition", "difference", "ci_low", "ci_high",
                                          "p_raw", "p_adjusted", "significant"])
    out += ["## Sensitivity", ""]
    rows = []
    for s in report["sensitivity"]:
        lam = f"{s['lambda_percent']}%" if "lambda_percent" in s else s.get("note", "n/a")
        by_m = ", ".join(f"{m}: {v}" for m, v in s.get("lambda_by_measure", {}).items())
        rows.append({"variation": s["variation"], "lambda": lam, "lambda_by_measure": by_m or "n/a",
                     "n_significant": s.get("n_significant"), "n_cells": s["n_cells"]})
    out += _table(rows, ["variation", "lambda", "lambda_by_measure", "n_significant", "n_cells"])
    if report["turing"]:
        out += ["## Turing test", ""]
        out += _table(report["turing"], ["model", "case", "condition", "p_llm_more_likely", "p_equal",
                                         "p_human_more_likely", "passed"])
    if report["normalized_std"]:
        out += ["## Normalized standard deviation", ""]
        out += _table(report["normalized_std"], ["model", "condition", "normalized_std"])
    if report["random_benchmark"]:
        out += ["## Uniform-random benchmark", ""]
        rows = [{"case": d, **b} for d, b in sorted(report["random_benchmark"].items())]
        out += _table(rows, ["case", "n", "mean", "std"])
    out += ["## Invalid replies", ""]
    out += _table(report["invalid_rates"], ["model", "case", "condition", "assistant_turns", "valid",
                                            *INVALID_CLASSES, "invalid_rate"])
    if report["published"]:
        out += ["## Published reference values", ""]
        out += _table(report["published"], ["quantity", "model", "measure", "condition", "value"])
    return "\n".join(out)


def _csv(rows: list[dict], cols: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def write_report(report: dict, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "report.json": json.dumps(report, indent=2, sort_keys=True) + "\n",
        "report.md": render_markdown(report) + "\n",
        "cdf.csv": _csv(report["cdf"], ["model", "case", "condition", "value", "cumulative_fraction"]),
        "invalid_rates.csv": _csv(report["invalid_rates"],
                                  ["model", "case", "condition", "assistant_turns", "valid", *INVALID_CLASSES,
                                   "invalid_rate"]),
    }
    paths = {}
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
        paths[name] = out / name
    return paths


def config_summary(cfg: CampaignConfig) -> dict:
    return {"case": cfg.case, "measures": cfg.measures, "n_sims": cfg.n_sims, "campaign_seed": cfg.campaign_seed,
            "conditions": sorted({c.name for c in cfg.conditions}), "task": asdict(cfg.task),
            "config_hash": cfg.config_hash}
