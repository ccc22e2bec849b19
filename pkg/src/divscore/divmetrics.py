"""The six diversity metrics and the per-scenario evaluation protocol.

Each metric is a pure function from scenario data to a scalar with a
declared direction (higher_better or lower_better). ``evaluate_scenarios``
applies the full protocol: pairwise-expensive metrics (Vendi, RougeL,
semantic) run on five stratified 10% subsamples and report the mean,
distribution metrics (IS, FID, metadata) run on the full scenario, and
optional percentile-bootstrap intervals wrap any of them.
"""

from __future__ import annotations

import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from divscore.dataio.scenarios import ScenarioSet
from divscore.dataio.table import DatasetTable
from divscore.numeric import (
    clamp_psd,
    cosine_kernel,
    gaussian_summary,
    kernel_eigenvalues,
    sym_eig,
    trace_sqrt_product,
)
from divscore.resample import BootstrapCI, bootstrap_ci, stratified_subsample

HIGHER_BETTER = "higher_better"
LOWER_BETTER = "lower_better"

# direction registry: metric family → which way is better
DIRECTIONS = {
    "IS": HIGHER_BETTER,
    "VS": HIGHER_BETTER,
    "FID": LOWER_BETTER,
    "RougeL": LOWER_BETTER,
    "semantic": LOWER_BETTER,
    "metadata": LOWER_BETTER,
}

PROB_TOL = 1e-6


def direction_of(name: str) -> str:
    """Direction for a metric name; per-source variants keep their family's."""
    family = name.split("_", 1)[0]
    if family not in DIRECTIONS:
        raise KeyError(f"unknown metric family {family!r} (from {name!r})")
    return DIRECTIONS[family]


@dataclass(frozen=True)
class MetricValue:
    """One metric evaluated on one scenario."""

    name: str
    value: float
    direction: str
    n_used: int
    repeats: int = 1

    def __post_init__(self) -> None:
        if not np.isfinite(self.value):
            raise ValueError(f"{self.name}: value {self.value} is not finite")
        if self.direction != direction_of(self.name):
            raise ValueError(
                f"{self.name}: direction {self.direction!r} contradicts the registry"
            )


def _as_matrix(features) -> np.ndarray:
    return np.asarray(getattr(features, "values", features), dtype=np.float64)


def _check_probs(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 1:
        raise ValueError(f"expected a nonempty (n, C) matrix, got shape {p.shape}")
    if p.min() < -PROB_TOL or p.max() > 1.0 + PROB_TOL:
        raise ValueError("probabilities must lie in [0, 1]")
    sums = p.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL)
    if bad.size:
        raise ValueError(f"probability row {bad[0]} sums to {sums[bad[0]]:.8f}, not 1")
    return np.clip(p, 0.0, 1.0)


def inception_score(probs: np.ndarray, splits: int = 1) -> MetricValue:
    """exp(E_x KL(p(y|x) ‖ p(y))), averaged over contiguous splits."""
    p = _check_probs(probs)
    if splits < 1 or splits > p.shape[0]:
        raise ValueError(f"splits must be in [1, n], got {splits}")
    scores = []
    for chunk in np.array_split(p, splits):
        marginal = chunk.mean(axis=0)
        kl = np.zeros(chunk.shape[0])
        for j in range(chunk.shape[1]):
            col = chunk[:, j]
            nz = col > 0.0
            kl[nz] += col[nz] * np.log(col[nz] / marginal[j])
        scores.append(float(np.exp(kl.mean())))
    return MetricValue(
        name="IS",
        value=float(np.mean(scores)),
        direction=HIGHER_BETTER,
        n_used=p.shape[0],
        repeats=splits,
    )


def fid(f_eval, f_ref, name: str = "FID") -> MetricValue:
    """‖μ_ref−μ_eval‖² + Tr(Σ_ref + Σ_eval − 2(Σ_ref·Σ_eval)^{1/2})."""
    e = _as_matrix(f_eval)
    r = _as_matrix(f_ref)
    if e.ndim != 2 or r.ndim != 2 or e.shape[1] != r.shape[1]:
        raise ValueError(f"feature dimensions differ: {e.shape} vs {r.shape}")
    ge = gaussian_summary(e)
    gr = gaussian_summary(r)
    delta = gr.mu - ge.mu
    value = float(
        delta @ delta
        + np.trace(gr.sigma)
        + np.trace(ge.sigma)
        - 2.0 * trace_sqrt_product(gr.sigma, ge.sigma)
    )
    return MetricValue(
        name=name,
        value=max(value, 0.0) if -1e-8 < value < 0.0 else value,
        direction=LOWER_BETTER,
        n_used=e.shape[0],
    )


def vendi_score(features, via: str = "auto", name: str = "VS") -> MetricValue:
    """exp(Shannon entropy) of the eigenvalues of cosine_kernel(F)/n."""
    f = _as_matrix(features)
    if via == "auto":
        values = kernel_eigenvalues(f)
    elif via == "kernel":
        values = clamp_psd(sym_eig(cosine_kernel(f) / f.shape[0]).values)
    elif via == "gram":
        norms = np.linalg.norm(f, axis=1)
        if not np.all(norms > 0.0):
            raise ValueError("gram route undefined for zero-norm rows")
        unit = f / norms[:, None]
        values = clamp_psd(sym_eig(unit.T @ unit / f.shape[0]).values)
    else:
        raise ValueError(f"via must be auto|kernel|gram, got {via!r}")
    nz = values[values > 0.0]
    entropy = float(-(nz * np.log(nz)).sum())
    return MetricValue(
        name=name,
        value=float(np.exp(entropy)),
        direction=HIGHER_BETTER,
        n_used=f.shape[0],
    )


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip surrounding punctuation."""
    tokens = [t.strip(string.punctuation) for t in text.lower().split()]
    return [t for t in tokens if t]


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l_f1(a: list[str], b: list[str]) -> float:
    """Longest-common-subsequence F1 between two token lists."""
    lcs = _lcs_length(a, b)
    if lcs == 0:
        return 0.0
    precision = lcs / len(a)
    recall = lcs / len(b)
    return 2.0 * precision * recall / (precision + recall)


def lexical_diversity(texts: list[str]) -> MetricValue:
    """Mean pairwise RougeL F1 over all unordered text pairs (lower = more diverse)."""
    token_lists = [tokenize(t) for t in texts]
    token_lists = [t for t in token_lists if t]
    n = len(token_lists)
    if n < 2:
        raise ValueError(f"need at least 2 non-empty texts, got {n}")
    total = 0.0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += rouge_l_f1(token_lists[i], token_lists[j])
            pairs += 1
    return MetricValue(
        name="RougeL",
        value=total / pairs,
        direction=LOWER_BETTER,
        n_used=n,
    )


def _pairwise_cosine_mean(rows: np.ndarray) -> float:
    """Mean cosine similarity over unordered pairs, self-pairs excluded."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ValueError(f"need at least 2 rows, got shape {rows.shape}")
    k = cosine_kernel(rows)
    n = rows.shape[0]
    upper = k[np.triu_indices(n, k=1)]
    return float(upper.mean())


def semantic_diversity(embeddings, name: str = "semantic") -> MetricValue:
    """Mean pairwise cosine similarity of text embeddings (lower = more diverse)."""
    e = _as_matrix(embeddings)
    return MetricValue(
        name=name,
        value=_pairwise_cosine_mean(e),
        direction=LOWER_BETTER,
        n_used=e.shape[0],
    )


def metadata_diversity(metadata: np.ndarray) -> MetricValue:
    """Mean pairwise cosine similarity of raw metadata rows (−1 = missing)."""
    m = np.asarray(metadata, dtype=np.float64)
    return MetricValue(
        name="metadata",
        value=_pairwise_cosine_mean(m),
        direction=LOWER_BETTER,
        n_used=m.shape[0],
    )


# ---------------------------------------------------------------------------
# Scenario evaluation protocol


@dataclass
class ScenarioReport:
    """Per-scenario metric values: metric rows × scenario columns."""

    scenario_names: list[str]
    values: dict[str, dict[str, MetricValue]] = field(default_factory=dict)  # scenario → metric → value
    intervals: dict[str, dict[str, BootstrapCI]] = field(default_factory=dict)
    reference: str | None = None

    def metric_names(self) -> list[str]:
        names: list[str] = []
        for scenario in self.scenario_names:
            for name in self.values.get(scenario, {}):
                if name not in names:
                    names.append(name)
        return names

    def matrix(self) -> dict[str, dict[str, float]]:
        """metric → scenario → value, absent entries omitted."""
        out: dict[str, dict[str, float]] = {}
        for name in self.metric_names():
            out[name] = {
                s: self.values[s][name].value
                for s in self.scenario_names
                if name in self.values.get(s, {})
            }
        return out

    def to_json(self) -> dict:
        metrics = {}
        for name in self.metric_names():
            cells = {}
            for scenario in self.scenario_names:
                mv = self.values.get(scenario, {}).get(name)
                if mv is None:
                    continue
                cell = {"value": mv.value, "n_used": mv.n_used, "repeats": mv.repeats}
                ci = self.intervals.get(scenario, {}).get(name)
                if ci is not None:
                    cell["ci"] = {
                        "lo": ci.lo,
                        "hi": ci.hi,
                        "point": ci.point,
                        "reps": ci.reps,
                        "level": ci.level,
                    }
                cells[scenario] = cell
            metrics[name] = {"direction": direction_of(name), "scenarios": cells}
        return {
            "scenarios": self.scenario_names,
            "reference": self.reference,
            "metrics": metrics,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioReport":
        scenario_names = list(obj["scenarios"])
        values: dict[str, dict[str, MetricValue]] = {s: {} for s in scenario_names}
        intervals: dict[str, dict[str, BootstrapCI]] = {}
        for name, entry in obj.get("metrics", {}).items():
            for scenario, cell in entry.get("scenarios", {}).items():
                values[scenario][name] = MetricValue(
                    name=name,
                    value=float(cell["value"]),
                    direction=entry["direction"],
                    n_used=int(cell["n_used"]),
                    repeats=int(cell.get("repeats", 1)),
                )
                if "ci" in cell:
                    ci = cell["ci"]
                    intervals.setdefault(scenario, {})[name] = BootstrapCI(
                        point=float(ci["point"]),
                        lo=float(ci["lo"]),
                        hi=float(ci["hi"]),
                        reps=int(ci["reps"]),
                        level=float(ci["level"]),
                    )
        return cls(
            scenario_names=scenario_names,
            values=values,
            intervals=intervals,
            reference=obj.get("reference"),
        )

    def to_csv(self) -> str:
        """Metric rows, scenario columns, direction arrows; CI in brackets."""
        arrow = {HIGHER_BETTER: "↑", LOWER_BETTER: "↓"}
        lines = ["metric,direction," + ",".join(self.scenario_names)]
        for name in self.metric_names():
            cells = []
            for scenario in self.scenario_names:
                mv = self.values.get(scenario, {}).get(name)
                if mv is None:
                    cells.append("")
                    continue
                text = f"{mv.value:.6g}"
                ci = self.intervals.get(scenario, {}).get(name)
                if ci is not None:
                    text += f" [{ci.lo:.6g}; {ci.hi:.6g}]"
                cells.append(f'"{text}"' if "," in text else text)
            lines.append(f"{name},{arrow[direction_of(name)]}," + ",".join(cells))
        return "\n".join(lines) + "\n"


def _subsampled_mean(rows, labels, compute, fraction, repeats, seed):
    """Mean of compute(subset) over stratified draws with seeds seed+0…r−1."""
    values = []
    n_used = 0
    for r in range(repeats):
        positions = stratified_subsample(labels, fraction=fraction, seed=seed + r)
        n_used = positions.size
        values.append(compute(rows[positions]))
    return float(np.mean(values)), n_used


def evaluate_scenarios(
    table: DatasetTable,
    scenarios: ScenarioSet,
    feature_sources: dict[str, np.ndarray] | None = None,
    probs: np.ndarray | None = None,
    embeddings: np.ndarray | None = None,
    *,
    seed: int = 0,
    subsample_fraction: float = 0.10,
    subsample_repeats: int = 5,
    with_bootstrap: bool = False,
    bootstrap_reps: int = 10,
    level: float = 0.95,
    threads: int | None = None,
) -> ScenarioReport:
    """Evaluate every applicable metric on every scenario.

    Feature sources map a tag (pixel, hog, external, …) to a full-table
    feature matrix; each yields a subsampled VS_<tag> and, when the
    scenario set names a reference, a full-scenario FID_<tag> against it.
    IS needs ``probs``, semantic diversity needs ``embeddings``, RougeL
    needs per-sample texts, metadata diversity needs metadata columns —
    a missing modality leaves the metric absent rather than zero.
    Scenarios evaluate concurrently; results assemble in scenario order
    and depend only on (inputs, seed).
    """
    sources = {tag: _as_matrix(f) for tag, f in (feature_sources or {}).items()}
    if probs is not None:
        probs = _check_probs(probs)
    if embeddings is not None:
        embeddings = np.asarray(embeddings, dtype=np.float64)

    reference_rows = scenarios.indices[scenarios.reference] if scenarios.reference else None

    def has_text(i: int) -> bool:
        return table.texts[i] is not None and bool(tokenize(table.texts[i]))

    def evaluate_one(scenario: str):
        rows = scenarios.indices[scenario]
        labels = table.labels
        results: dict[str, MetricValue] = {}
        cis: dict[str, BootstrapCI] = {}

        def add(name, compute, subsampled, base_rows=None):
            eligible = rows if base_rows is None else base_rows
            if subsampled:
                def full(r):
                    value, _ = _subsampled_mean(
                        r, labels[r], compute, subsample_fraction, subsample_repeats, seed
                    )
                    return value

                value, n_used = _subsampled_mean(
                    eligible, labels[eligible], compute, subsample_fraction, subsample_repeats, seed
                )
                repeats = subsample_repeats
            else:
                full = compute
                value = compute(eligible)
                n_used = eligible.size
                repeats = 1
            results[name] = MetricValue(
                name=name,
                value=value,
                direction=direction_of(name),
                n_used=n_used,
                repeats=repeats,
            )
            if with_bootstrap:
                cis[name] = bootstrap_ci(
                    full, eligible, reps=bootstrap_reps, level=level, seed=seed
                )

        if probs is not None:
            add("IS", lambda r: inception_score(probs[r]).value, subsampled=False)
        for tag, matrix in sources.items():
            if reference_rows is not None:
                add(
                    f"FID_{tag}",
                    lambda r, m=matrix: fid(m[r], m[reference_rows]).value,
                    subsampled=False,
                )
        for tag, matrix in sources.items():
            add(f"VS_{tag}", lambda r, m=matrix: vendi_score(m[r]).value, subsampled=True)
        texted = np.array([i for i in rows if has_text(i)], dtype=np.int64)
        if texted.size >= 2:
            add(
                "RougeL",
                lambda r: lexical_diversity([table.texts[i] for i in r]).value,
                subsampled=True,
                base_rows=texted,
            )
        if embeddings is not None:
            add(
                "semantic",
                lambda r: semantic_diversity(embeddings[r]).value,
                subsampled=True,
            )
        if table.metadata.shape[1] >= 1:
            add("metadata", lambda r: metadata_diversity(table.metadata[r]).value, subsampled=False)
        return scenario, results, cis

    names = list(scenarios.names)
    if threads is not None and threads <= 1:
        evaluated = [evaluate_one(s) for s in names]
    else:
        with ThreadPoolExecutor(max_workers=threads or min(8, max(1, len(names)))) as pool:
            evaluated = list(pool.map(evaluate_one, names))

    report = ScenarioReport(scenario_names=names, reference=scenarios.reference)
    for scenario, results, cis in evaluated:
        report.values[scenario] = results
        if cis:
            report.intervals[scenario] = cis
    return report
