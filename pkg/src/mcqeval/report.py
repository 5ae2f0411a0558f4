"""Render analysis outputs as stable CSV and markdown tables.

Seven tables: overall quality, per-criterion means, per-category means, the
criterion verdict matrix, category-level equivalence for each track, and the
summary with track agreement. Rendering is pure formatting over the persisted
analysis JSON: identical inputs give byte-identical files, and every number
is recomputable from the analysis artifacts (rounding only). Means render
with 2 decimals, effect sizes with 3, percentages with 1.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Any, Mapping, Sequence

from .rubric import RubricRegistry

CHECK = "✓"
CROSS = "✗"


def fmt_mean(x: float) -> str:
    return f"{x:.2f}"


def fmt_effect(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.3f}"


def fmt_pct(x: float) -> str:
    return f"{x:.1f}"


def fmt_agreement(matching: int, total: int) -> str:
    return f"{matching}/{total} ({fmt_pct(100.0 * matching / total)}%)"


def _write_csv(path: Path, rows: Sequence[Sequence[Any]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(rows)


def _write_markdown(path: Path, title: str, rows: Sequence[Sequence[Any]]) -> None:
    header, *body = rows
    lines = [f"# {title}", ""]
    lines.append("| " + " | ".join(str(c) for c in header) + " |")
    lines.append("|" + "|".join(" --- " for _ in header) + "|")
    for row in body:
        lines.append("| " + " | ".join(str(c) for c in row) + " |")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _emit(
    out_dir: Path, run_id: str, name: str, title: str, rows: Sequence[Sequence[Any]]
) -> dict[str, str]:
    csv_path = out_dir / f"{name}__{run_id}.csv"
    md_path = out_dir / f"{name}__{run_id}.md"
    _write_csv(csv_path, rows)
    _write_markdown(md_path, title, rows)
    return {"csv": str(csv_path), "md": str(md_path)}


def _cell_index(aggregates: Mapping) -> dict[tuple[str, str], Mapping]:
    index = {}
    for cell in aggregates["cells"]:
        index[(cell["judge_id"], cell["set_id"])] = cell
    return index


def _track_index(analysis: Mapping) -> dict[tuple[str, str], Mapping]:
    return {(t["judge_id"], t["track"]): t for t in analysis["tracks"]}


def _validate_inputs(
    aggregates: Mapping, analysis: Mapping, registry: RubricRegistry
) -> None:
    judges = aggregates["judges"]
    sets = aggregates["sets"]
    cells = _cell_index(aggregates)
    for judge in judges:
        for set_id in sets:
            if (judge, set_id) not in cells:
                raise ValueError(f"missing descriptive cell for ({judge}, {set_id})")
    tracks = _track_index(analysis)
    expected_ids = list(registry.criterion_ids)
    for judge in judges:
        for track in ("matched", "whole"):
            if (judge, track) not in tracks:
                raise ValueError(f"missing analysis for ({judge}, {track})")
            got = [c["criterion_id"] for c in tracks[(judge, track)]["criteria"]]
            if got != expected_ids:
                raise ValueError(f"inconsistent criterion ordering for ({judge}, {track})")


def render_reports(
    aggregates: Mapping,
    analysis: Mapping,
    registry: RubricRegistry,
    out_dir: str | Path,
    run_id: str,
) -> dict[str, dict[str, str]]:
    """Write all report tables; returns {table: {"csv": path, "md": path}}."""
    _validate_inputs(aggregates, analysis, registry)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    judges: list[str] = list(aggregates["judges"])
    sets: list[str] = list(aggregates["sets"])
    cells = _cell_index(aggregates)
    tracks = _track_index(analysis)
    bundle: dict[str, dict[str, str]] = {}

    # Table 1: overall quality per (set, judge)
    rows: list[list[Any]] = [
        ["set", "judge", "n", "mean", "sd", "pct_high", "pct_review", "pct_serious"]
    ]
    for judge in judges:
        for set_id in sets:
            cell = cells[(judge, set_id)]
            bands = cell["bands"]
            rows.append(
                [
                    set_id,
                    judge,
                    cell["n"],
                    fmt_mean(cell["mean"]),
                    fmt_mean(cell["sd"]),
                    fmt_pct(bands["pct_high"]),
                    fmt_pct(bands["pct_review"]),
                    fmt_pct(bands["pct_serious"]),
                ]
            )
    bundle["overall_quality"] = _emit(
        out_dir, run_id, "table1_overall_quality", "Overall quality summary", rows
    )

    # Table 2: per-criterion means across the judge x set configurations,
    # with the three lowest criteria by cross-configuration mean flagged.
    configs = [(judge, set_id) for judge in judges for set_id in sets]
    cross_mean = {
        cid: sum(cells[cfg]["per_criterion"][cid] for cfg in configs) / len(configs)
        for cid in registry.criterion_ids
    }
    lowest_three = set(sorted(cross_mean, key=lambda c: (cross_mean[c], c))[:3])
    header = ["category", "criterion"] + [f"{j}x{s}" for j, s in configs] + ["lowest_three"]
    rows = [header]
    for criterion in registry.criteria:
        cid = criterion.criterion_id
        flag = cid in lowest_three
        values = [fmt_mean(cells[cfg]["per_criterion"][cid]) for cfg in configs]
        if flag:
            values = [f"**{v}**" for v in values]
        rows.append([criterion.category, cid] + values + [str(flag).lower()])
    rows.append(
        ["", "grand_mean"]
        + [fmt_mean(cells[cfg]["grand_mean"]) for cfg in configs]
        + [""]
    )
    bundle["criterion_means"] = _emit(
        out_dir, run_id, "table2_criterion_means", "Mean score per criterion", rows
    )

    # Table 3: category means, sorted by cross-configuration grand mean.
    cat_cross = {
        cat: sum(cells[cfg]["per_category"][cat] for cfg in configs) / len(configs)
        for cat in registry.category_names()
    }
    ordered_cats = sorted(cat_cross, key=lambda c: (-cat_cross[c], c))
    rows = [["category"] + [f"{j}x{s}" for j, s in configs]]
    for cat in ordered_cats:
        rows.append([cat] + [fmt_mean(cells[cfg]["per_category"][cat]) for cfg in configs])
    bundle["category_means"] = _emit(
        out_dir, run_id, "table3_category_means", "Mean category scores", rows
    )

    # Table 4: per-criterion verdict matrix with totals.
    verdict_cols = [(judge, track) for judge in judges for track in ("matched", "whole")]
    verdicts: dict[tuple[str, str], dict[str, bool]] = {
        col: {c["criterion_id"]: c["equivalent"] for c in tracks[col]["criteria"]}
        for col in verdict_cols
    }
    rows = [
        ["category", "criterion"] + [f"{j} {t}" for j, t in verdict_cols]
    ]
    for criterion in registry.criteria:
        cid = criterion.criterion_id
        rows.append(
            [criterion.category, cid]
            + [CHECK if verdicts[col][cid] else CROSS for col in verdict_cols]
        )
    rows.append(
        ["", "total_equivalent_24"]
        + [str(sum(verdicts[col].values())) for col in verdict_cols]
    )
    bundle["verdict_matrix"] = _emit(
        out_dir, run_id, "table4_verdict_matrix", "Per-criterion equivalence verdicts", rows
    )

    # Tables 5 and 6: category-level equivalence per track.
    for track, table_name, label in (
        ("matched", "table5_category_equivalence_matched", "matched track"),
        ("whole", "table6_category_equivalence_whole", "whole-set track"),
    ):
        pair_labels = [
            p["pair"] for p in tracks[(judges[0], track)]["categories"][0]["pairwise"]
        ]
        effect = "dz" if track == "matched" else "g"
        header = ["category"]
        for judge in judges:
            header += [f"{judge} {effect}[{p}]" for p in pair_labels]
            header.append(f"{judge} equivalent")
        rows = [header]
        cat_records = {
            judge: {c["category"]: c for c in tracks[(judge, track)]["categories"]}
            for judge in judges
        }
        for cat in registry.category_names():
            row: list[Any] = [cat]
            for judge in judges:
                rec = cat_records[judge][cat]
                row += [fmt_effect(p["effect_size"]) for p in rec["pairwise"]]
                row.append(CHECK if rec["equivalent"] else CROSS)
            rows.append(row)
        totals: list[Any] = ["equivalent_categories_6"]
        for judge in judges:
            count = tracks[(judge, track)]["equivalent_categories_count"]
            totals += ["" for _ in pair_labels]
            totals.append(str(count))
        rows.append(totals)
        ns_row: list[Any] = ["n"]
        for judge in judges:
            set_ns = tracks[(judge, track)]["set_ns"]
            ns_row += ["" for _ in pair_labels]
            ns_row.append(";".join(f"{s}={set_ns[s]}" for s in sorted(set_ns)))
        rows.append(ns_row)
        key = "category_equivalence_matched" if track == "matched" else "category_equivalence_whole"
        bundle[key] = _emit(
            out_dir, run_id, table_name, f"Category-level equivalence ({label})", rows
        )

    # Table 7: summary with track agreement.
    agreements = {a["judge_id"]: a for a in analysis["agreements"]}
    header = ["metric"]
    for judge in judges:
        header += [f"{judge} matched", f"{judge} whole"]
    rows = [header]
    crit_row: list[Any] = ["equivalent_criteria_24"]
    cat_row: list[Any] = ["equivalent_categories_6"]
    decision_row: list[Any] = ["decision"]
    agree_row: list[Any] = ["track_agreement"]
    for judge in judges:
        for track in ("matched", "whole"):
            result = tracks[(judge, track)]
            crit_row.append(str(result["equivalent_criteria_count"]))
            cat_row.append(str(result["equivalent_categories_count"]))
            decision_row.append(result["decision"])
        agreement = agreements[judge]
        rendered = fmt_agreement(agreement["matching"], agreement["total"])
        agree_row += [rendered, rendered]
    rows += [crit_row, cat_row, decision_row, agree_row]
    bundle["summary"] = _emit(
        out_dir, run_id, "table7_summary", "Equivalence testing summary", rows
    )

    return bundle
