"""Cohort analysis: gain tables, test selection, FDR correction, rendering.

The primary analysis runs 18 tests: three motor-score rows (distal,
proximal, total; unassisted gain only) and fifteen arm-test rows (five
categories times gains A, B, C). Each row is gated per cohort: a paired t
test when Shapiro-Wilk on the gain residuals keeps normality at 0.05,
otherwise the exact Wilcoxon signed-rank test. All primary p-values enter
one Benjamini-Hochberg pass. Secondary tables (by control group, and
box-and-block by baseline functionality) report mean gains only. Display
rounding is fixed (gains two decimals, p-values and thresholds three) and
applies only at render time; comparisons use unrounded values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from exobench.outcomes.model import (
    ARAT_SUBSCALES,
    ARAT_TOTAL,
    BBT,
    FM_DISTAL,
    FM_PROXIMAL,
    FM_TOTAL,
    MCID,
    Comparison,
    GainResult,
    Group,
    Measure,
    Phase,
    SubjectOutcomes,
    compute_gains,
    display_round,
)
from exobench.outcomes.stats import (
    bh_procedure,
    levene,
    paired_t,
    shapiro_wilk,
    wilcoxon_signed_rank,
)

REPORT_SCHEMA = "exobench/report-v1"

NORMALITY_ALPHA = 0.05

#: Primary test grid in table order.
PRIMARY_FM_ROWS = (FM_DISTAL, FM_PROXIMAL, FM_TOTAL)
PRIMARY_ARAT_ROWS = (ARAT_SUBSCALES[0], ARAT_SUBSCALES[1], ARAT_SUBSCALES[2], ARAT_SUBSCALES[3], ARAT_TOTAL)


def row_label(measure: Measure, comparison: Comparison) -> str:
    if measure.family == "FM":
        return f"FM-{measure.subscale}"
    return f"{measure.family}-{measure.subscale} ({comparison.name})"


@dataclass(frozen=True)
class TestResult:
    label: str
    measure: Measure
    comparison: Comparison
    n: int
    mean_gain: Fraction | None
    kind: str | None            # "PAIRED_T" | "WILCOXON"
    statistic: float | None
    shapiro_p: float | None
    p: float | None
    rank: int | None
    threshold: Fraction | None
    significant: bool | None
    homogeneity_p: float | None = None
    error: str | None = None


@dataclass(frozen=True)
class GroupMeans:
    n: int
    means: Mapping[str, Fraction]  # row key -> exact mean gain


@dataclass(frozen=True)
class CohortReport:
    n_subjects: int
    group_sizes: Mapping[str, int]
    q: Fraction
    m: int
    primary: tuple[TestResult, ...]
    fm_by_group: Mapping[str, GroupMeans]
    arat_by_group: Mapping[str, GroupMeans]
    bbt_by_functionality: Mapping[str, GroupMeans]
    warnings: tuple[str, ...] = ()


def _phase_vectors(
    cohort: Sequence[SubjectOutcomes],
    measure: Measure,
    comparison: Comparison,
) -> tuple[list[float], list[float]]:
    xs, ys = [], []
    for subject in cohort:
        a = subject.score(measure, comparison.minuend)
        b = subject.score(measure, comparison.subtrahend)
        if a is not None and b is not None:
            xs.append(float(a))
            ys.append(float(b))
    return xs, ys


def _group_homogeneity(
    cohort: Sequence[SubjectOutcomes],
    gains: GainResult,
) -> float | None:
    by_group: dict[Group, list[int]] = {Group.EMG: [], Group.SH: []}
    group_of = {s.subject_id: s.group for s in cohort}
    for sid, gain in gains.gains.items():
        by_group[group_of[sid]].append(gain)
    if any(len(v) < 2 for v in by_group.values()):
        return None
    try:
        _stat, p = levene(by_group[Group.EMG], by_group[Group.SH])
    except ValueError:
        return None
    return p


def analyze_cohort(
    cohort: Sequence[SubjectOutcomes],
    q: float | str | Fraction = Fraction(1, 20),
    two_sided: bool = True,
) -> CohortReport:
    """Run the full primary and secondary analysis over a cohort."""
    if not cohort:
        raise ValueError("cohort is empty")
    if not two_sided:
        raise NotImplementedError("one-sided primary analysis is not wired up")
    q = Fraction(str(q)) if isinstance(q, (str, float)) else Fraction(q)

    warnings: list[str] = []
    rows: list[dict] = []
    grid = [(m, Comparison.A) for m in PRIMARY_FM_ROWS]
    grid += [(m, c) for m in PRIMARY_ARAT_ROWS for c in Comparison]

    for measure, comparison in grid:
        label = row_label(measure, comparison)
        gains = compute_gains(cohort, measure, comparison)
        if gains.excluded:
            warnings.append(f"{label}: excluded {len(gains.excluded)} subject(s): {', '.join(gains.excluded)}")
        row: dict = {
            "label": label, "measure": measure, "comparison": comparison,
            "n": gains.n, "mean": gains.mean if gains.n else None,
            "homogeneity": _group_homogeneity(cohort, gains),
        }
        values = gains.values()
        if gains.n < 3:
            row["error"] = "too few subjects with both phases"
            rows.append(row)
            continue
        try:
            residuals = [v - sum(values) / len(values) for v in values]
            sw = shapiro_wilk(residuals)
            row["shapiro_p"] = sw.p
        except ValueError as exc:
            row["error"] = f"normality gate failed: {exc}"
            rows.append(row)
            continue
        xs, ys = _phase_vectors(cohort, measure, comparison)
        try:
            if sw.p >= NORMALITY_ALPHA:
                res = paired_t(xs, ys)
                row.update(kind="PAIRED_T", statistic=res.t, p=res.p)
            else:
                res = wilcoxon_signed_rank(xs, ys)
                row.update(kind="WILCOXON", statistic=res.statistic, p=res.p)
        except ValueError as exc:
            row["error"] = str(exc)
        rows.append(row)

    testable = [(r["label"], r["p"]) for r in rows if r.get("p") is not None]
    decisions = {d.label: d for d in bh_procedure(testable, q)} if testable else {}

    primary = []
    for r in rows:
        d = decisions.get(r["label"])
        primary.append(TestResult(
            label=r["label"],
            measure=r["measure"],
            comparison=r["comparison"],
            n=r["n"],
            mean_gain=r.get("mean"),
            kind=r.get("kind"),
            statistic=r.get("statistic"),
            shapiro_p=r.get("shapiro_p"),
            p=r.get("p"),
            rank=d.rank if d else None,
            threshold=d.threshold if d else None,
            significant=d.significant if d else None,
            homogeneity_p=r.get("homogeneity"),
            error=r.get("error"),
        ))

    by_group: dict[str, list[SubjectOutcomes]] = {g.value: [] for g in Group}
    for s in cohort:
        by_group[s.group.value].append(s)

    def group_table(measures_comparisons) -> dict[str, GroupMeans]:
        out = {}
        for gname, members in by_group.items():
            means = {}
            for measure, comparison in measures_comparisons:
                g = compute_gains(members, measure, comparison)
                if g.n:
                    means[row_label(measure, comparison)] = g.mean
            out[gname] = GroupMeans(n=len(members), means=means)
        return out

    fm_by_group = group_table([(m, Comparison.A) for m in PRIMARY_FM_ROWS])
    arat_by_group = group_table([(m, c) for m in PRIMARY_ARAT_ROWS for c in Comparison])

    functional: dict[str, list[SubjectOutcomes]] = {"functional": [], "non_functional": []}
    for s in cohort:
        flag = s.functional_at_baseline
        if flag is None:
            warnings.append(f"{s.subject_id}: no baseline box-and-block count; omitted from functionality split")
        else:
            functional["functional" if flag else "non_functional"].append(s)
    bbt_by_functionality = {}
    for key, members in functional.items():
        means = {}
        for comparison in Comparison:
            g = compute_gains(members, BBT, comparison)
            if g.n:
                means[f"BBT ({comparison.name})"] = g.mean
        bbt_by_functionality[key] = GroupMeans(n=len(members), means=means)

    return CohortReport(
        n_subjects=len(cohort),
        group_sizes={g: len(v) for g, v in by_group.items()},
        q=q,
        m=len(testable),
        primary=tuple(primary),
        fm_by_group=fm_by_group,
        arat_by_group=arat_by_group,
        bbt_by_functionality=bbt_by_functionality,
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# Rendering


def _fmt_gain(value: Fraction | None) -> str:
    return "-" if value is None else f"{display_round(value, 2):.2f}"


def _fmt_p(value: float | Fraction | None) -> str:
    return "-" if value is None else f"{display_round(value, 3):.3f}"


def render_text(report: CohortReport) -> str:
    lines: list[str] = []
    groups = ", ".join(f"{g} n={n}" for g, n in report.group_sizes.items())
    lines.append(f"Cohort analysis: {report.n_subjects} subjects ({groups})")
    lines.append(f"FDR control: Benjamini-Hochberg, q = {float(report.q):g}, m = {report.m}")
    lines.append("")
    header = f"{'test':<18} {'n':>2} {'mean':>6} {'method':<9} {'p':>6} {'rank':>4} {'thresh':>6}  sig"
    lines.append("Primary outcome tests")
    lines.append(header)
    lines.append("-" * len(header))
    for r in report.primary:
        if r.error:
            lines.append(f"{r.label:<18} {r.n:>2} {_fmt_gain(r.mean_gain):>6} {'error':<9} {r.error}")
            continue
        kind = "paired-t" if r.kind == "PAIRED_T" else "wilcoxon"
        sig = "yes" if r.significant else "no"
        lines.append(
            f"{r.label:<18} {r.n:>2} {_fmt_gain(r.mean_gain):>6} {kind:<9} "
            f"{_fmt_p(r.p):>6} {r.rank:>4} {_fmt_p(r.threshold):>6}  {sig}"
        )
    lines.append("")

    def emit_group_table(title: str, table: Mapping[str, GroupMeans]) -> None:
        lines.append(title)
        for gname, gm in table.items():
            lines.append(f"  {gname} (n={gm.n})")
            for key, mean in gm.means.items():
                lines.append(f"    {key:<18} {_fmt_gain(mean):>6}")
        lines.append("")

    emit_group_table("Motor-score gains by control group (mean only)", report.fm_by_group)
    emit_group_table("Arm-test gains by control group (mean only)", report.arat_by_group)
    emit_group_table("Box-and-block gains by baseline functionality (mean only)", report.bbt_by_functionality)

    fm_lo, fm_hi = MCID["FM"]
    lines.append(f"Reference MCID: motor score {fm_lo}-{fm_hi} points, arm test {MCID['ARAT'][0]} points.")
    if report.warnings:
        lines.append("")
        lines.append("Warnings:")
        for w in report.warnings:
            lines.append(f"  {w}")
    return "\n".join(lines) + "\n"


def render_json(report: CohortReport) -> str:
    def result_doc(r: TestResult) -> dict:
        return {
            "label": r.label,
            "n": r.n,
            "mean_gain": None if r.mean_gain is None else float(r.mean_gain),
            "mean_gain_display": None if r.mean_gain is None else display_round(r.mean_gain, 2),
            "kind": r.kind,
            "statistic": r.statistic,
            "shapiro_p": r.shapiro_p,
            "p": r.p,
            "p_display": None if r.p is None else display_round(r.p, 3),
            "rank": r.rank,
            "threshold": None if r.threshold is None else float(r.threshold),
            "threshold_display": None if r.threshold is None else display_round(r.threshold, 3),
            "significant": r.significant,
            "homogeneity_p": r.homogeneity_p,
            "error": r.error,
        }

    def group_doc(table: Mapping[str, GroupMeans]) -> dict:
        return {
            g: {"n": gm.n, "mean_gains": {k: float(v) for k, v in gm.means.items()}}
            for g, gm in table.items()
        }

    doc = {
        "schema": REPORT_SCHEMA,
        "n_subjects": report.n_subjects,
        "group_sizes": dict(report.group_sizes),
        "q": float(report.q),
        "m": report.m,
        "primary": [result_doc(r) for r in report.primary],
        "fm_by_group": group_doc(report.fm_by_group),
        "arat_by_group": group_doc(report.arat_by_group),
        "bbt_by_functionality": group_doc(report.bbt_by_functionality),
        "mcid": {"FM": list(MCID["FM"]), "ARAT": list(MCID["ARAT"])},
        "warnings": list(report.warnings),
    }
    return json.dumps(doc, indent=2) + "\n"
