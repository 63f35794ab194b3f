"""Command line entry point: export one family (or all) to a directory."""
from __future__ import annotations

import json
from pathlib import Path

import click

from .export import EXPECTED_FILE, MODEL_FILE, export_fixtures
from .fixtures import FAMILIES, FixtureSpec


@click.command(name="export-fixtures")
@click.option("--family", type=click.Choice(FAMILIES + ("all",)), required=True,
              help="Fixture family to export, or all three.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for weights, boxes and the noise input.")
@click.option("--out", type=click.Path(file_okay=False), required=True,
              help="Output directory; each family gets a subdirectory.")
@click.option("--max-boxes", type=int, default=6, show_default=True,
              help="Detector rows, two of which are decoys.")
@click.option("--map-size", type=int, default=16, show_default=True,
              help="Density map edge length.")
@click.option("--mass", type=float, default=1.5, show_default=True,
              help="Density map total mass.")
def main(family: str, seed: int, out: str, max_boxes: int, map_size: int,
         mass: float) -> None:
    """Write tiny deterministic model files plus their expected outputs.

    Each family directory holds model.onnx, expected.json and the three
    canonical input images the expectations were computed for.
    """
    chosen = FAMILIES if family == "all" else (family,)
    written: dict[str, dict] = {}
    for fam in chosen:
        target = Path(out) / fam
        try:
            spec = FixtureSpec(family=fam, seed=seed, max_boxes=max_boxes,
                               map_shape=(map_size, map_size), mass=mass)
            manifest = export_fixtures(spec, target)
        except ValueError as exc:
            raise click.ClickException(str(exc)) from exc
        written[fam] = {
            "dir": str(target),
            "files": sorted([MODEL_FILE, EXPECTED_FILE]
                            + [case["file"] for case in manifest["cases"]]),
        }
    click.echo(json.dumps(written, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
