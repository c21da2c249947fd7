import csv
import math
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, List, Optional

import typer
from pydantic import BaseModel, ValidationError
from rich.console import Console
from rich.table import Table

from app.config import settings
from app.exceptions import LabError
from app.utils.logger import get_logger
from app.schemas import (
    RUN_CONFIGS,
    AklConfig,
    AklReport,
    CasimirConfig,
    CasimirReport,
    CountConfig,
    EigenResidualReport,
    EvolveConfig,
    GramConfig,
    GramReport,
    HagedornConfig,
    HagedornReport,
    PowerLawReport,
    RunConfigBase,
    RunManifest,
    ScalingConfig,
    ScalingSummary,
    SeriesTerm,
    SpinAklConfig,
    SpinAklRowReport,
    SpinAklSummary,
    SpinSpectrumConfig,
    TrajectoryReport,
    VevConfig,
    VevReport,
    load_run_config,
)

logger = get_logger(__name__)
console = Console()

TAIL_WARNING = 0.05


@dataclass
class RunContext:
    """Output directory plus the artifacts and warnings collected by a run."""

    output_dir: Path
    artifacts: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def write_json(self, name: str, payload: BaseModel) -> Path:
        path = self.output_dir / name
        path.write_text(payload.model_dump_json(indent=2) + "\n")
        self.artifacts.append(name)
        return path

    def write_csv(self, name: str, header: List[str], rows: List[list]) -> Path:
        path = self.output_dir / name
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)
        self.artifacts.append(name)
        return path

    def warn(self, message: str) -> None:
        logger.warning(message)
        self.warnings.append(message)


def _apply_environment_overrides() -> None:
    budget = os.environ.get("ENUMERATION_BUDGET")
    if budget:
        settings.ENUMERATION_BUDGET = int(budget)
        logger.debug(f"Enumeration budget overridden to {budget}")


def _run(
    command: str,
    config_path: Optional[Path],
    flags: dict,
    handler: Callable[[RunConfigBase, RunContext], None],
) -> None:
    _apply_environment_overrides()
    try:
        if config_path is not None:
            config = load_run_config(command, config_path)
        else:
            config = RUN_CONFIGS[command].model_validate(
                {k: v for k, v in flags.items() if v is not None}
            )
    except ValidationError as exc:
        console.print(f"[red]Invalid {command} config:[/red]\n{exc}")
        raise typer.Exit(code=2)
    except LabError as exc:
        console.print(f"[red]{exc}[/red]")
        raise typer.Exit(code=exc.exit_code)

    output_dir = Path(config.output_dir or settings.OUTPUT_DIR)
    output_dir.mkdir(parents=True, exist_ok=True)
    run = RunContext(output_dir)
    started = datetime.now(timezone.utc)
    clock = time.perf_counter()
    exit_code = 0
    logger.info(f"Running {command} into {output_dir}")
    try:
        handler(config, run)
    except LabError as exc:
        exit_code = exc.exit_code
        logger.error(f"{command} failed: {exc}")
        console.print(f"[red]{type(exc).__name__}: {exc}[/red]")
    finally:
        if settings.WRITE_MANIFEST:
            manifest = RunManifest(
                command=command,
                config=config.model_dump(mode="json"),
                version=settings.VERSION,
                started_at=started,
                finished_at=datetime.now(timezone.utc),
                elapsed_seconds=time.perf_counter() - clock,
                artifacts=list(run.artifacts),
                warnings=run.warnings,
                exit_code=exit_code,
            )
            (output_dir / "manifest.json").write_text(
                manifest.model_dump_json(indent=2) + "\n"
            )
    logger.info(f"Finished {command} with exit code {exit_code}")
    if exit_code:
        raise typer.Exit(code=exit_code)


def _table(title: str, header: List[str], rows: List[list]) -> None:
    table = Table(title=title)
    for column in header:
        table.add_column(column)
    for row in rows:
        table.add_row(*[str(x) for x in row])
    console.print(table)


def _series_strings(matrix) -> List[List[str]]:
    return [[repr(x) for x in row] for row in matrix]


def run_vev(config: VevConfig, run: RunContext) -> None:
    from app.models.trace import parse_monomial
    from app.physics.fock_oracle import oracle_vev
    from app.physics.trace_algebra import vev

    product = [parse_monomial(text, config.species) for text in config.product]
    amplitude = vev(product, config.species)
    report = VevReport(
        product=[m.render() for m in product],
        terms=[SeriesTerm(power=str(p), coefficient=str(c)) for p, c in amplitude],
        leading_power=(
            str(amplitude.leading_power) if not amplitude.is_zero() else None
        ),
    )
    for n in config.n_values:
        report.values[n] = str(amplitude.evaluate(n))
        if config.oracle:
            value = oracle_vev(product, n, config.oracle_cutoff, config.species)
            report.oracle[n] = str(value)
    if config.oracle and config.n_values:
        report.oracle_agrees = all(
            report.oracle[n] == report.values[n] for n in config.n_values
        )
        if not report.oracle_agrees:
            run.warn("Fock oracle disagrees with the contraction engine")
    run.write_json("vev.json", report)
    rows = [[t.power, t.coefficient] for t in report.terms]
    run.write_csv("vev.csv", ["power", "coefficient"], rows)
    _table(" ".join(report.product), ["power of N", "coefficient"], rows)


def run_gram(config: GramConfig, run: RunContext) -> None:
    from app.physics.code_akl import build_code, to_logical

    code = build_code(config.model, config.length, config.n)
    report = GramReport(
        model=code.model,
        labels=list(code.labels),
        states=[state.render() for state in code.raw_states],
        orthonormalization=code.orthonormalization,
        gram=_series_strings(code.gram),
        logical_overlap=_series_strings(to_logical(code, code.gram)),
        gram_at_n=code.gram_at(config.n).tolist() if config.n else None,
    )
    run.write_json("gram.json", report)
    _table(
        f"Model {code.model} Gram",
        ["", *code.labels],
        [[label, *row] for label, row in zip(code.labels, report.gram)],
    )


def run_akl(config: AklConfig, run: RunContext) -> None:
    from app.physics.code_akl import (
        build_code,
        classify_errors,
        exceptional_errors,
        generate_errors,
        kl_matrices,
        predict_decay,
    )
    from app.physics.lindblad_sim import thermal_rate

    code = build_code(config.model, config.length)
    errors = generate_errors(
        config.model, config.case, config.cutoff, config.length, config.coupling_base
    )
    kl = kl_matrices(code, errors, config.workers)
    classification = classify_errors(kl)
    payload = kl.to_report()
    report = AklReport(
        model=config.model,
        case=config.case,
        cutoff=config.cutoff,
        classes=classification.classes,
        level_counts=errors.level_counts(),
        density_exponent=errors.density_exponent(),
        exceptional=[e.label for e in exceptional_errors(errors)],
        **payload,
    )
    if config.n is not None:
        rates = {
            label: coupling * thermal_rate(energy * config.omega, config.beta)
            for label, energy, coupling in zip(kl.labels, kl.energies, kl.couplings)
        }
        prediction = predict_decay(
            classification, rates, config.time_grid.times(), config.n
        )
        report.predicted_information = prediction.information.tolist()
        report.first_class_rate = prediction.first_class_rate
        report.second_class_rate = prediction.second_class_rate
    for violation in kl.violations:
        run.warn(violation)
    run.write_json("akl.json", report)
    rows = [
        [label, energy, classification.classes.get(label, "")]
        for label, energy in zip(kl.labels, kl.energies)
    ]
    run.write_csv("akl_classes.csv", ["label", "energy", "class"], rows)
    _table(f"Model {config.model} {config.case} errors", ["label", "energy", "class"], rows)


def _trajectory(point) -> TrajectoryReport:
    return TrajectoryReport(
        n=point.n,
        memory_time=point.memory_time,
        extrapolated=point.extrapolated,
        early_slope=point.early_slope,
        tail_fraction=point.tail_fraction,
    )


def _fit(fit) -> Optional[PowerLawReport]:
    if fit is None:
        return None
    return PowerLawReport(exponent=fit.exponent, stderr=fit.stderr, band=list(fit.band))


def run_evolve(config: EvolveConfig, run: RunContext) -> None:
    from app.physics.lindblad_sim import simulate

    point = simulate(
        config.model,
        config.case,
        config.n,
        config.beta,
        config.cutoff,
        config.time_grid.times(),
        length=config.length,
        level_max=config.level_max,
        omega=config.omega,
        penalty=config.penalty,
        delta=config.delta,
    )
    if point.tail_fraction > TAIL_WARNING:
        run.warn(
            f"Truncated sector tail carries {point.tail_fraction:.1%} of the rate; "
            f"raise level_max"
        )
    rows = [
        [t, info, tr, leak]
        for t, info, tr, leak in zip(point.times, point.information, point.trace, point.leakage)
    ]
    run.write_csv("evolve.csv", ["t", "mutual_information", "trace", "leakage"], rows)
    run.write_json("evolve.json", _trajectory(point))
    _table(
        f"Model {config.model} N={config.n}",
        ["memory time", "extrapolated", "early slope"],
        [[f"{point.memory_time:.6g}", point.extrapolated, f"{point.early_slope:.6g}"]],
    )


def run_scaling(config: ScalingConfig, run: RunContext) -> None:
    from app.physics.lindblad_sim import scaling_report

    report = scaling_report(
        config.model,
        config.case,
        config.ns,
        config.beta,
        config.cutoff,
        config.time_grid.times(),
        delta=config.delta,
        length=config.length,
        level_max=config.level_max,
        omega=config.omega,
        penalty=config.penalty,
    )
    for point in report.points:
        if point.tail_fraction > TAIL_WARNING:
            run.warn(f"N={point.n}: sector tail fraction {point.tail_fraction:.1%}")
    summary = ScalingSummary(
        model=report.model,
        case=report.case,
        beta=report.beta,
        delta=report.delta,
        points=[_trajectory(p) for p in report.points],
        memory_fit=_fit(report.memory_fit),
        slope_fit=_fit(report.slope_fit),
        ground_multiplier=report.ground_multiplier,
    )
    header = ["n", "memory_time", "extrapolated", "early_slope", "tail_fraction"]
    rows = [
        [p.n, p.memory_time, p.extrapolated, p.early_slope, p.tail_fraction]
        for p in report.points
    ]
    run.write_csv("scaling.csv", header, rows)
    run.write_json("scaling.json", summary)
    _table(f"Model {config.model} scaling", header, rows)


def run_spin_spectrum(config: SpinSpectrumConfig, run: RunContext) -> None:
    from app.physics.spin_model import low_spectrum

    spectrum = low_spectrum(
        config.n,
        config.quanta_max,
        coupling=config.coupling,
        h=config.h,
        length=config.length,
        low_fraction=config.low_fraction,
    )
    rows = [
        [level.quanta, f"{level.energy:.12g}", level.multiplicity, level.low]
        for level in spectrum.levels
    ]
    run.write_csv("spin_spectrum.csv", ["quanta", "energy", "multiplicity", "low"], rows)
    counts = [
        [q, spectrum.low_counts[q], spectrum.partition_counts[q]]
        for q in spectrum.low_counts
    ]
    run.write_csv("spin_low_counts.csv", ["quanta", "low", "partitions"], counts)
    if not spectrum.matches_partitions():
        run.warn("Low-cluster multiplicities differ from the partition counts")
    _table(f"Spin N={config.n} low clusters", ["quanta", "low", "p(q)"], counts)


def run_spin_akl(config: SpinAklConfig, run: RunContext) -> None:
    from app.physics.spin_model import (
        RESIDUAL_MAX_N,
        eigen_residuals,
        overlap_scaling,
        spin_akl,
    )

    overlaps = overlap_scaling(config.length, sorted(config.ns))
    report = spin_akl(config.ns, config.length, config.orders)
    summary = SpinAklSummary(
        length=config.length,
        ns=report.ns,
        overlaps=overlaps.overlaps,
        overlap_exponent=overlaps.exponent,
        rows=[
            SpinAklRowReport(
                order=row.order,
                off_diagonal=row.off_diagonal,
                diagonal_difference=row.diagonal_difference,
                off_coefficient=row.off_coefficient,
                diagonal_coefficient=row.diagonal_coefficient,
                reference=row.reference,
                relative_deviation=row.relative_deviation,
                diagonal_consistent_with_zero=row.diagonal_consistent_with_zero,
            )
            for row in report.rows
        ],
        cross_terms=report.cross_terms,
        identity_values=[list(v) for v in report.identity_values],
    )
    if config.residuals:
        for n in [n for n in config.ns if n <= RESIDUAL_MAX_N]:
            for item in eigen_residuals(n):
                summary.residuals.append(
                    EigenResidualReport(
                        n=n,
                        label=item.label,
                        stated=float(item.stated),
                        rayleigh=float(item.rayleigh),
                        residual=item.residual,
                        is_eigenstate=item.is_eigenstate,
                    )
                )
    run.write_json("spin_akl.json", summary)
    rows = [
        [r.order, f"{r.off_coefficient:.6g}", r.reference, r.diagonal_consistent_with_zero]
        for r in summary.rows
    ]
    _table(f"Spin code L={config.length}", ["n", "N^-2 coefficient", "2n", "diag ~ 0"], rows)


def run_count(config: CountConfig, run: RunContext) -> None:
    from collections import Counter

    from app.physics.singlet_basis import (
        BASIS_MODELS,
        enumerate_basis,
        necklace_count,
        partition_count,
    )

    header = ["n", "partitions", "single_trace_2"]
    levels = {}
    if config.basis:
        for model in BASIS_MODELS:
            header.append(model)
            levels[model] = Counter(
                s.energy for s in enumerate_basis(model, config.n_max)
            )
    rows = []
    for n in range(config.n_max + 1):
        row = [n, partition_count(n), necklace_count(2, n) if n else 1]
        row.extend(levels[model][n] for model in levels)
        rows.append(row)
    run.write_csv("count.csv", header, rows)
    _table("Singlet counting", header, rows)


def run_hagedorn(config: HagedornConfig, run: RunContext) -> None:
    from app.exceptions import PreconditionError
    from app.physics.singlet_basis import (
        DegeneracyModel,
        hagedorn_sum,
        hagedorn_temperature,
    )

    degeneracy = DegeneracyModel.parse(config.degeneracy)
    result = hagedorn_sum(
        config.q, 1 / config.temperature, config.omega, degeneracy, config.cutoff
    )
    try:
        critical = hagedorn_temperature(degeneracy, config.omega)
    except PreconditionError:
        critical = None
    report = HagedornReport(
        degeneracy=config.degeneracy,
        omega=config.omega,
        temperature=config.temperature,
        q=config.q,
        cutoff=config.cutoff,
        value=result.value,
        log_value=result.log_value,
        divergent=result.divergent,
        tail_ratio=result.tail_ratio,
        critical_temperature=critical,
    )
    if result.divergent:
        run.warn(
            f"Hagedorn tail: the sum grows over the last quartile at T={config.temperature}"
        )
    run.write_json("hagedorn.json", report)
    _table(
        "Hagedorn sum",
        ["T", "T_c", "log sum", "divergent"],
        [[config.temperature, critical, f"{result.log_value:.6g}", result.divergent]],
    )


def run_casimir(config: CasimirConfig, run: RunContext) -> None:
    from app.physics.lindblad_sim import nonsinglet_multiplier
    from app.physics.singlet_basis import casimir_thermal_bound

    penalty = config.penalty or 2 * config.temperature * math.log(config.n)
    bound = casimir_thermal_bound(
        penalty, config.omega, config.temperature, config.n, config.cutoff
    )
    report = CasimirReport(
        n=config.n,
        omega=config.omega,
        temperature=config.temperature,
        penalty=penalty,
        expectation=bound.expectation,
        bound=bound.bound,
        per_oscillator_ratio=bound.per_oscillator_ratio,
        below_bound=bound.expectation <= bound.bound,
        nonsinglet_multiplier=nonsinglet_multiplier(
            config.n, penalty, config.temperature
        ),
    )
    run.write_json("casimir.json", report)
    _table(
        "Casimir penalty",
        ["N", "J", "<H_G>", "bound"],
        [[config.n, f"{penalty:.6g}", f"{bound.expectation:.6g}", f"{bound.bound:.6g}"]],
    )


ConfigOption = typer.Option(None, "--config", help="JSON run config")
OutputOption = typer.Option(None, "--output-dir", help="Artifact directory")


def create_app() -> typer.Typer:
    """App factory building the command-line interface."""
    app = typer.Typer(
        name=settings.APP_NAME,
        help=settings.APP_DESCRIPTION,
        no_args_is_help=True,
        add_completion=False,
    )

    @app.command("vev")
    def vev_command(
        product: Optional[List[str]] = typer.Option(None, "--product", "-p"),
        species: Optional[str] = typer.Option(None, help="Comma separated alphabet"),
        n: Optional[List[int]] = typer.Option(None, "--n"),
        oracle: bool = typer.Option(False, help="Cross-check with the Fock oracle"),
        oracle_cutoff: Optional[int] = typer.Option(None),
        config: Optional[Path] = ConfigOption,
        output_dir: Optional[str] = OutputOption,
    ):
        """Exact vacuum expectation value of a product of trace monomials."""
        flags = dict(
            product=product or None,
            species=species.split(",") if species else None,
            n_values=n or None,
            oracle=oracle,
            oracle_cutoff=oracle_cutoff,
            output_dir=output_dir,
        )
        _run("vev", config, flags, run_vev)

    @app.command("gram")
    def gram_command(
        model: Optional[str] = typer.Option(None),
        length: Optional[int] = typer.Option(None, "--length", "-L"),
        n: Optional[int] = typer.Option(None, "--n"),
        config: Optional[Path] = ConfigOption,
        output_dir: Optional[str] = OutputOption,
    ):
        """Exact Gram matrix and orthonormalized overlaps of a code."""
        flags = dict(model=model, length=length, n=n, output_dir=output_dir)
        _run("gram", config, flags, run_gram)

    @app.command("akl")
    def akl_command(
        model: Optional[str] = typer.Option(None),
        case: Optional[str] = typer.Option(None),
        cutoff: Optional[int] = typer.Option(None),
        length: Optional[int] = typer.Option(None, "--length", "-L"),
        workers: Optional[int] = typer.Option(None),
        config: Optional[Path] = ConfigOption,
        output_dir: Optional[str] = OutputOption,
    ):
        """Approximate Knill-Laflamme data and error classes."""
        flags = dict(
            model=model,
            case=case,
            cutoff=cutoff,
            length=length,
            workers=workers,
            output_dir=output_dir,
        )
        _run("akl", config, flags, run_akl)

    @app.command("evolve")
    def evolve_command(
        model: Optional[str] = typer.Option(None),
        case: Optional[str] = typer.Option(None),
        cutoff: Optional[int] = typer.Option(None),
        n: Optional[int] = typer.Option(None, "--n"),
        beta: Optional[float] = typer.Option(None),
        t_max: Optional[float] = typer.Option(None),
        points: int = typer.Option(101),
        length: Optional[int] = typer.Option(None, "--length", "-L"),
        penalty: Optional[float] = typer.Option(None),
        config: Optional[Path] = ConfigOption,
        output_dir: Optional[str] = OutputOption,
    ):
        """Integrate the Lindblad equation and track the mutual information."""
        flags = dict(
            model=model,
            case=case,
            cutoff=cutoff,
            n=n,
            beta=beta,
            length=length,
            penalty=penalty,
            time_grid={"t_max": t_max, "points": points} if t_max else None,
            output_dir=output_dir,
        )
        _run("evolve", config, flags, run_evolve)

    @app.command("scaling")
    def scaling_command(
        model: Optional[str] = typer.Option(None),
        case: Optional[str] = typer.Option(None),
        cutoff: Optional[int] = typer.Option(None),
        n: Optional[List[int]] = typer.Option(None, "--n"),
        beta: Optional[float] = typer.Option(None),
        t_max: Optional[float] = typer.Option(None),
        points: int = typer.Option(101),
        length: Optional[int] = typer.Option(None, "--length", "-L"),
        penalty: Optional[float] = typer.Option(None),
        config: Optional[Path] = ConfigOption,
        output_dir: Optional[str] = OutputOption,
    ):
        """Memory time and early decay slope against N."""
        flags = dict(
            model=model,
            case=case,
            cutoff=cutoff,
            ns=n or None,
            beta=beta,
            length=length,
            penalty=penalty,
            time_grid={"t_max": t_max, "points": points} if t_max else None,
            output_dir=output_dir,
        )
        _run("scaling", config, flags, run_scaling)

    @app.command("spin-spectrum")
    def spin_spectrum_command(
        n: Optional[int] = typer.Option(None, "--n"),
        quanta_max: Optional[int] = typer.Option(None),
        coupling: Optional[float] = typer.Option(None, "--J"),
        h: Optional[float] = typer.Option(None, "--h"),
        config: Optional[Path] = ConfigOption,
        output_dir: Optional[str] = OutputOption,
    ):
        """Low spectrum of the pseudo-generator penalty Hamiltonian."""
        flags = dict(
            n=n, quanta_max=quanta_max, coupling=coupling, h=h, output_dir=output_dir
        )
        _run("spin-spectrum", config, flags, run_spin_spectrum)

    @app.command("spin-akl")
    def spin_akl_command(
        n: Optional[List[int]] = typer.Option(None, "--n"),
        length: Optional[int] = typer.Option(None, "--length", "-L"),
        order: Optional[List[int]] = typer.Option(None, "--order"),
        residuals: bool = typer.Option(True),
        config: Optional[Path] = ConfigOption,
        output_dir: Optional[str] = OutputOption,
    ):
        """Knill-Laflamme fits and eigen residuals of the spin code."""
        flags = dict(
            ns=n or None,
            length=length,
            orders=order or None,
            residuals=residuals,
            output_dir=output_dir,
        )
        _run("spin-akl", config, flags, run_spin_akl)

    @app.command("count")
    def count_command(
        n_max: Optional[int] = typer.Option(None),
        basis: bool = typer.Option(True),
        config: Optional[Path] = ConfigOption,
        output_dir: Optional[str] = OutputOption,
    ):
        """Partition, necklace and singlet-basis level counts."""
        flags = dict(n_max=n_max, basis=basis, output_dir=output_dir)
        _run("count", config, flags, run_count)

    @app.command("hagedorn")
    def hagedorn_command(
        degeneracy: Optional[str] = typer.Option(None),
        omega: Optional[float] = typer.Option(None),
        temperature: Optional[float] = typer.Option(None, "--temperature", "--T"),
        q: Optional[float] = typer.Option(None),
        cutoff: Optional[int] = typer.Option(None),
        config: Optional[Path] = ConfigOption,
        output_dir: Optional[str] = OutputOption,
    ):
        """Thermal sum over levels with a growing degeneracy."""
        flags = dict(
            degeneracy=degeneracy,
            omega=omega,
            temperature=temperature,
            q=q,
            cutoff=cutoff,
            output_dir=output_dir,
        )
        _run("hagedorn", config, flags, run_hagedorn)

    @app.command("casimir")
    def casimir_command(
        n: Optional[int] = typer.Option(None, "--n"),
        omega: Optional[float] = typer.Option(None),
        temperature: Optional[float] = typer.Option(None, "--temperature", "--T"),
        penalty: Optional[float] = typer.Option(None, "--J"),
        config: Optional[Path] = ConfigOption,
        output_dir: Optional[str] = OutputOption,
    ):
        """Thermal expectation of the Casimir penalty against its bound."""
        flags = dict(
            n=n,
            omega=omega,
            temperature=temperature,
            penalty=penalty,
            output_dir=output_dir,
        )
        _run("casimir", config, flags, run_casimir)

    logger.debug(f"{settings.APP_NAME} v{settings.VERSION} commands registered")
    return app


app = create_app()


if __name__ == "__main__":
    app()
