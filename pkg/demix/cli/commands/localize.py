"""
The ``localize`` command: hyperspectral target localization.
"""

import logging
from pathlib import Path
from typing import Optional

import pandas as pd
import typer

from demix.cli.common import command_errors, parse_int_list, print_table, write_summary
from demix.core.exceptions import InputError
from demix.models.schemas import DictionarySource, DictionarySpec, SparsityMode, ThresholdMode
from demix.services.hyperspectral import TargetLocalizer, crop
from demix.utils.file_utils import read_cube, write_frame, write_matrix

logger = logging.getLogger(__name__)


def localize(
    cube_path: Path = typer.Option(..., "--cube", help="Cube JSON description or band CSV directory"),
    labels: Optional[Path] = typer.Option(None, help="Label map CSV"),
    class_id: Optional[int] = typer.Option(None, "--class", min=0, help="Target class"),
    dict_mode: DictionarySource = typer.Option(DictionarySource.SAMPLED, help="Dictionary source"),
    atoms: Optional[int] = typer.Option(None, "--d", min=1, help="Dictionary size"),
    rho: Optional[float] = typer.Option(None, help="Sparse coding weight (learned)"),
    learn_iters: int = typer.Option(50, min=1, help="Dictionary learning iterations"),
    dict_path: Optional[Path] = typer.Option(None, help="Dictionary file (file)"),
    mode: SparsityMode = typer.Option(SparsityMode.ENTRY_WISE, help="Sparsity model"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Fixed lambda (skips the grid)"),
    lambda_count: Optional[int] = typer.Option(None, min=1, help="Lambda grid size"),
    threshold_mode: ThresholdMode = typer.Option(ThresholdMode.AUC, help="Pre-threshold rule"),
    crop_box: Optional[str] = typer.Option(None, "--crop", help="row,col,height,width"),
    compare: bool = typer.Option(False, "--compare", help="Also run the baseline methods"),
    seed: int = typer.Option(0, min=0),
    jobs: Optional[int] = typer.Option(None, min=1, help="Workers for the lambda grid"),
    max_iters: Optional[int] = typer.Option(None, help="Iteration budget per solve"),
    out: Path = typer.Option(..., help="Output directory"),
) -> None:
    """Write scoremap.csv, roc.csv, lambdas.csv, summary.json (and comparison.csv)."""
    with command_errors() as run_id:
        cube = read_cube(cube_path, labels)
        if crop_box:
            box = parse_int_list(crop_box, "--crop")
            if len(box) != 4:
                raise InputError("--crop needs row,col,height,width")
            cube = crop(cube, *box)

        spec = DictionarySpec(
            source=dict_mode,
            class_id=class_id,
            atoms=atoms,
            rho=rho,
            iters=learn_iters,
            seed=seed,
            path=str(dict_path) if dict_path else None,
        )
        localizer = TargetLocalizer(
            mode=mode,
            lambda_count=lambda_count,
            threshold_mode=threshold_mode,
            jobs=jobs,
            max_iters=max_iters,
        )
        result = localizer.localize(cube, spec, lam)

        write_matrix(out / "scoremap.csv", result.score_map)
        write_frame(out / "lambdas.csv", result.lambda_table)
        summary = {
            "mode": mode.value,
            "dictionary": dict_mode.value,
            "class_id": class_id,
            "d": result.problem.d,
            "height": cube.height,
            "width": cube.width,
            "lambda": result.lam,
            "pre_threshold": result.pre_threshold,
            "converged": result.components.converged,
        }
        if result.curve is not None:
            write_frame(out / "roc.csv", result.curve.to_frame())
            point = result.method_result().model_dump(mode="json")
            summary.update(
                auc=result.curve.auc,
                flipped=result.curve.flipped,
                threshold=point["threshold"],
                tpr=point["tpr"],
                fpr=point["fpr"],
            )

        if compare:
            rows = localizer.compare_methods(cube, spec, result)
            frame = pd.DataFrame([row.model_dump() for row in rows])
            write_frame(out / "comparison.csv", frame)
            print_table("Method comparison", frame.to_dict("records"))

        write_summary(out, summary, run_id)
