from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from html import escape
from pathlib import Path
from typing import Any

from src import __version__
from src.data_loader import save_field, save_json, write_csv
from src.reporter_utils import (ACCEPTANCE_LABELS, CHECK_COLS, CHECK_LABELS, check_dot, fill_template,
                                format_number, jsonable, load_template, status_badge)
from src.scenarios import ACCEPTANCE_CHECKS

logger = logging.getLogger(__name__)

REPORT_JSON = "report.json"
REPORT_HTML = "report.html"
FIELD_SUFFIX = ".cdlf"


@dataclass
class RunReport:
    """
    Outcome of one CLI run over one or more scenarios.

    Attributes:
        scenarios: Per scenario: passed, check counts, measured constants.
        acceptance: Per acceptance criterion: scenario, check and its state.
        provenance: Code version and the config hash of every scenario.
        csv_digest: SHA-256 over every CSV written, in file-name order.
        wall_clock: Seconds per scenario and in total; not part of the hash.
    """
    scenarios: dict[str, dict[str, Any]]
    acceptance: dict[str, dict[str, Any]]
    provenance: dict[str, Any]
    csv_digest: str
    wall_clock: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.scenarios) and all(s["passed"] for s in self.scenarios.values())

    def hashed_content(self) -> dict[str, Any]:
        return jsonable({
            "scenarios": self.scenarios,
            "acceptance": self.acceptance,
            "provenance": self.provenance,
            "csv_digest": self.csv_digest,
        })

    def report_hash(self) -> str:
        """SHA-256 of the canonical JSON of the report without wall-clock times."""
        canonical = json.dumps(self.hashed_content(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.hashed_content(),
            "passed": self.passed,
            "report_hash": self.report_hash(),
            "wall_clock": jsonable(self.wall_clock),
        }


def csv_digest(paths: list[Path]) -> str:
    digest = hashlib.sha256()
    for path in sorted(paths, key=lambda p: p.name):
        digest.update(path.name.encode("utf-8"))
        digest.update(path.read_bytes())
    return digest.hexdigest()


def acceptance_table(results: dict[str, dict], digest: str) -> dict[str, dict[str, Any]]:
    """
    Resolve every acceptance criterion to its named check.

    A criterion whose scenario did not run is reported with ``passed = None``;
    the CSV digest is recorded, and its reproducibility is what a second run
    with the same config compares.
    """
    table = {}
    for criterion, (scenario, check) in ACCEPTANCE_CHECKS.items():
        entry = {"scenario": scenario, "check": check, "label": ACCEPTANCE_LABELS[criterion],
                 "passed": None, "value": None}
        if scenario == "run":
            entry["value"] = digest
        elif scenario in results:
            match = [c for c in results[scenario]["checks"] if c["name"] == check]
            if match:
                entry["passed"] = match[0]["passed"]
                entry["value"] = match[0]["value"]
            else:
                entry["passed"] = False
        table[str(criterion)] = entry
    return table


class Reporter:
    """
    Collect scenario results and export tables, field dumps and the run report.

    Attributes:
        output_dir: Destination of every file.
        results: Scenario results keyed by scenario name, in insertion order.
        config_hashes: Config hash per scenario.
        written_csv: CSV files written so far.
    """
    def __init__(self, output_dir: str | Path):
        self.output_dir = Path(output_dir)
        self.columns = CHECK_COLS
        self.results: dict[str, dict[str, Any]] = {}
        self.config_hashes: dict[str, str] = {}
        self.written_csv: list[Path] = []

    def add_result(self, result: dict[str, Any], config_hash: str) -> None:
        """
        Store a scenario result and write its per-scenario files.

        Args:
            result: Dictionary returned by `Scenario.run`.
            config_hash: Hash of the config the scenario ran with.

        Raises:
            OSError: If a file cannot be written.
        """
        name = result["scenario"]
        self.results[name] = result
        self.config_hashes[name] = config_hash
        self.export_scenario(result, config_hash)

    def _csv(self, rows: list[dict], columns: list[str], filename: str) -> Path:
        path = self.output_dir / filename
        write_csv(rows, columns, path)
        self.written_csv.append(path)
        return path

    def export_scenario(self, result: dict[str, Any], config_hash: str) -> None:
        """
        Write ``<scenario>_checks.csv``, ``_table.csv``, artifact tables,
        field dumps and ``_summary.json``.
        """
        self.output_dir.mkdir(parents=True, exist_ok=True)
        name = result["scenario"]
        self._csv(result["checks"], self.columns, f"{name}_checks.csv")
        self._csv(result["table"], result["table_columns"], f"{name}_table.csv")
        for artifact, (columns, rows) in result.get("artifacts", {}).items():
            self._csv(rows, columns, f"{name}_{artifact}.csv")

        fields = []
        for field_name, (fld, metadata) in result.get("fields", {}).items():
            path = self.output_dir / f"{name}_{field_name}{FIELD_SUFFIX}"
            save_field(fld, path, {"scenario": name, "config_hash": config_hash, **jsonable(metadata)})
            fields.append(path.name)

        save_json(jsonable({
            "scenario": name,
            "passed": result["passed"],
            "config_hash": config_hash,
            "checks": result["checks"],
            "measured": result["measured"],
            "fields": fields,
        }), self.output_dir / f"{name}_summary.json")
        logger.info("Wrote %s outputs to %s", name, self.output_dir)

    def build_report(self, wall_clock: dict[str, float] | None = None) -> RunReport:
        digest = csv_digest(self.written_csv)
        scenarios = {
            name: {
                "passed": r["passed"],
                "checks_passed": sum(c["passed"] for c in r["checks"]),
                "checks_total": len(r["checks"]),
                "measured": r["measured"],
            }
            for name, r in self.results.items()
        }
        provenance = {"code_version": __version__, "config_hashes": dict(self.config_hashes)}
        return RunReport(scenarios, acceptance_table(self.results, digest), provenance, digest,
                         dict(wall_clock or {}))

    def export_json(self, report: RunReport) -> Path:
        path = self.output_dir / REPORT_JSON
        save_json(report.to_dict(), path)
        return path

    def _calc_summary(self) -> tuple[int, int, int, str]:
        """
        Calculate summary statistics over the collected scenarios.

        Returns:
            A tuple containing:
            - number of scenarios
            - number of scenarios with every check passed
            - total number of checks
            - current timestamp (YYYY-MM-DD HH:MM)
        """
        now = datetime.now().strftime("%Y-%m-%d %H:%M")
        total = len(self.results)
        passed = sum(1 for r in self.results.values() if r["passed"])
        checks = sum(len(r["checks"]) for r in self.results.values())
        return total, passed, checks, now

    def _render_cards(self) -> str:
        """
        Render one card per scenario with a dot per check.

        Returns:
            HTML string containing rendered cards for all scenarios.
        """
        parts: list[str] = []
        for name, r in self.results.items():
            checks = r["checks"]
            passed = sum(c["passed"] for c in checks)
            pills = "".join(
                f'<div class="pill">{check_dot(c["passed"])}<span>{escape(c["name"])}</span></div>'
                for c in checks
            )
            failed = [c for c in checks if not c["passed"]]
            if failed:
                detail = "<ul class='recs'>" + "".join(
                    f"<li><b>{escape(c['name'])}</b>: {escape(str(c['detail']))}</li>" for c in failed) + "</ul>"
            else:
                detail = "<div class='muted'>All checks passed</div>"

            parts.append(f"""
            <article class="card">
              <div class="card__top">
                <div>
                  <div class="card__title">{escape(name)}</div>
                  <div class="card__url">config {escape(self.config_hashes.get(name, '')[:12])}</div>
                </div>
                <div class="card__score">{status_badge(passed, len(checks))}</div>
              </div>

              <div class="pills">
                {pills}
              </div>

              <div class="card__recs">
                <div class="section-title">Failed checks</div>
                {detail}
              </div>
            </article>
            """)
        return "".join(parts) if parts else '<div class="muted">No scenarios were run.</div>'

    def _render_table(self) -> tuple[str, str]:
        """
        Render every check of every scenario as one HTML table.

        Returns:
            A tuple of:
                - HTML for the table header (`<th>` cells)
                - HTML for the table body rows (`<tr>` elements)
        """
        header_cells = ["Scenario"] + [escape(CHECK_LABELS[c]) for c in CHECK_COLS]
        table_header_html = "".join(f"<th>{c}</th>" for c in header_cells)

        row_parts: list[str] = []
        for name, r in self.results.items():
            for c in r["checks"]:
                cells = [
                    f"<td>{escape(name)}</td>",
                    f'<td class="td-title">{escape(c["name"])}</td>',
                    f"<td class='td-center'>{'✓' if c['passed'] else '✗'}</td>",
                    f"<td>{format_number(c['value'])}</td>",
                    f"<td>{format_number(c['threshold'])}</td>",
                    f"<td>{escape(str(c['detail']))}</td>",
                ]
                row_parts.append("<tr>" + "".join(cells) + "</tr>")
        return table_header_html, "".join(row_parts)

    def _render_acceptance(self, report: RunReport) -> str:
        rows = []
        for criterion, entry in report.acceptance.items():
            value = entry["value"]
            shown = value[:16] if isinstance(value, str) else format_number(value)
            rows.append(
                f"<tr><td>{criterion}</td><td>{escape(entry['label'])}</td>"
                f"<td>{escape(entry['scenario'])} / {escape(entry['check'])}</td>"
                f"<td class='td-center'>{check_dot(entry['passed'])}</td><td>{escape(shown)}</td></tr>"
            )
        return "".join(rows)

    def export_html(self, report: RunReport, title: str = "cdlab run report") -> Path:
        """
        Export the collected results to an HTML summary.

        Args:
            report: Run report supplying acceptance state and provenance.
            title: Report title displayed in the HTML template.

        Raises:
            OSError: If templates cannot be read or the output file cannot be written.
        """
        try:
            template = load_template("report.html")
            css = load_template("report.css")
        except OSError as exc:
            raise OSError("Failed to load HTML/CSS templates") from exc

        total, passed, checks, now = self._calc_summary()
        table_header_html, table_rows_html = self._render_table()
        ctx = {
            "TITLE": escape(title),
            "CSS": css,
            "NOW": escape(now),
            "VERSION": escape(__version__),
            "REPORT_HASH": report.report_hash(),
            "TOTAL_SCENARIOS": str(total),
            "PASSED_SCENARIOS": str(passed),
            "TOTAL_CHECKS": str(checks),
            "CARDS_HTML": self._render_cards(),
            "ACCEPTANCE_ROWS_HTML": self._render_acceptance(report),
            "TABLE_HEADER_HTML": table_header_html,
            "TABLE_ROWS_HTML": table_rows_html,
        }
        html = fill_template(template, ctx)

        path = self.output_dir / REPORT_HTML
        try:
            with open(path, "w", encoding="utf-8") as f:
                f.write(html)
        except OSError as exc:
            raise OSError(f"Failed to write HTML to {path}") from exc
        return path
