import logging
from pathlib import Path
from typing import Optional, Union

from fracwave.core.config import Settings
from fracwave.schemas.report import ExperimentReport
from fracwave.services.config_service import ConfigService
from fracwave.services.field_io_service import FieldIOService

logger = logging.getLogger(__name__)


class ReportService:
    @staticmethod
    def output_dir(report: ExperimentReport, output_dir: Optional[Union[str, Path]] = None) -> Path:
        """Explicit argument, then the config's output_dir, then FRACWAVE_OUTPUT_DIR"""
        chosen = output_dir or report.config.get("output_dir") or Settings().output_dir
        return Path(chosen)

    @staticmethod
    def write(report: ExperimentReport, output_dir: Optional[Union[str, Path]] = None) -> Path:
        """
        report.json, one CSV per table, a re-loadable config.cfg, FWF1 snapshots
        snapshots/<name>_u.fwf and snapshots/<name>_v.fwf, and trajectory.csv when
        the experiment recorded a trajectory.
        """
        directory = ReportService.output_dir(report, output_dir)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
        for table in report.tables:
            FieldIOService.write_rows(directory / f"{table.name}.csv", table.columns, table.rows)
        (directory / "config.cfg").write_text(ConfigService.dump_flat(report.config), encoding="utf-8")
        for name, point in report.snapshots.items():
            FieldIOService.write(directory / "snapshots" / f"{name}_u.fwf", point.u)
            FieldIOService.write(directory / "snapshots" / f"{name}_v.fwf", point.v)
        if report.trajectory is not None:
            FieldIOService.write_trajectory(directory, report.trajectory)
        logger.info(
            "Wrote %s report (%d tables, %d snapshots) to %s", report.name, len(report.tables), len(report.snapshots), directory
        )
        return directory

    @staticmethod
    def summary(report: ExperimentReport) -> str:
        lines = [f"{report.name}: {'PASS' if report.passed else 'FAIL'} ({report.wall_time:.1f}s, seed {report.seed})"]
        for verdict in report.verdicts:
            mark = "ok  " if verdict.passed else "FAIL"
            value = "nan" if verdict.value is None else f"{verdict.value:.6g}"
            lines.append(f"  [{mark}] {verdict.name}: {value} {verdict.comparison} {verdict.threshold:g}")
        for fit in report.fits:
            lines.append(f"  fit {fit.name}: slope {fit.slope:.4g}, intercept {fit.intercept:.4g}, R^2 {fit.r_squared:.3f}")
        lines.extend(f"  note: {note}" for note in report.notes)
        return "\n".join(lines)
