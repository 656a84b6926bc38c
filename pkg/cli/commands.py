"""
Command-line interface for the Schwinger fractal-ansatz toolkit.
"""
import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from analysis.ansatz import (fidelity, fixed_weights_from, get_spec, hamiltonian_sector_for,
                             reconstruct_state, reference_data, table_from_states, to_hamiltonian_frame,
                             weight_series, weights_converged)
from analysis.hamiltonian import ModelParams
from analysis.observables import dominant_pixel, phase_scan
from analysis.overlaps import OverlapCalculus
from analysis.recursion import (TRANSCRIPTIONS, TableInputs, ad_recursion, afw_recursion,
                                audit_reduced_hamiltonian)
from config import config
from data.ground_states import GroundStateProvider
from data.result_store import ResultStore
from utils.errors import (CacheIntegrityError, InvalidParameterError, MissingCacheEntryError, NumericalError)
from utils.fractal_codec import (PifsCode, codec_fidelity_series, compress, decompress, mask_and_renormalize,
                                 psnr, range_residuals)
from utils.helpers import LOGGER_NAME, setup_logging, write_json
from utils.qubism import QubismImage, export_pgm, import_pgm, state_to_qubism
from utils.visualization import ChartGenerator, ReportFormatter

logger = logging.getLogger(LOGGER_NAME)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_MISSING_CACHE = 4

EXIT_CODES = {
    InvalidParameterError: EXIT_USAGE,
    MissingCacheEntryError: EXIT_MISSING_CACHE,
    NumericalError: EXIT_NUMERICAL,
    CacheIntegrityError: EXIT_NUMERICAL,
}

CSV_FLOAT_FORMAT = "%.17g"


@dataclass
class RunConfig:
    """Parameters of one command invocation, stored next to its outputs."""

    command: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    code_version: str = config.CODE_VERSION

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        parameters = {k: v for k, v in sorted(vars(args).items()) if k not in ("handler", "command")}
        return cls(args.command, parameters)

    def validate(self) -> None:
        p = self.parameters
        for name in ("n", "n_min", "n_max", "n_seed", "n_target"):
            if p.get(name) is not None and p[name] < 1:
                raise InvalidParameterError(f"--{name.replace('_', '-')} must be positive")
        if p.get("n_min") is not None and p.get("n_max") is not None and p["n_max"] < p["n_min"]:
            raise InvalidParameterError("--n-max must not be below --n-min")
        if p.get("n_seed") is not None and p.get("n_target") is not None and p["n_target"] < p["n_seed"]:
            raise InvalidParameterError("--n-target must not be below --n-seed")
        if p.get("tol") is not None and p["tol"] <= 0:
            raise InvalidParameterError("--tol must be positive")

    def save(self, out_dir: str) -> str:
        return write_json(os.path.join(out_dir, "run_config.json"),
                          {"command": self.command, "parameters": self.parameters,
                           "code_version": self.code_version})


class FractalCLI:
    """Argument parsing, dispatch and exit-code mapping."""

    def __init__(self):
        self.parser = argparse.ArgumentParser(
            prog="schwinger-fractal",
            description="Exact diagonalization and fractal-ansatz tools for the lattice Schwinger model")
        self.subparsers = self.parser.add_subparsers(dest="command", required=True)
        self.chart_generator = ChartGenerator()
        self.report_formatter = ReportFormatter()
        self._register_handlers()

    # Parser construction

    def _add_command(self, name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        sub = self.subparsers.add_parser(name, help=help_text, description=help_text)
        sub.set_defaults(handler=handler)
        sub.add_argument("--x", type=float, default=1.0, help="hopping coupling x")
        sub.add_argument("--mu", type=float, default=0.1, help="mass mu")
        sub.add_argument("--epsilon0", type=float, default=0.0, help="background field")
        sub.add_argument("--seed", type=int, default=config.DEFAULT_SEED, help="Lanczos start-vector seed")
        sub.add_argument("--tol", type=float, default=config.SOLVER_TOL, help="eigensolver residual tolerance")
        sub.add_argument("--cache-dir", default=None, help="cache root (default $SCHWINGER_CACHE_DIR)")
        sub.add_argument("--out", default=None, help="output directory")
        sub.add_argument("--dense", action="store_true", help="dense eigensolver instead of Lanczos")
        sub.add_argument("--workers", type=int, default=None, help="matvec worker threads")
        sub.add_argument("--compute-missing", action="store_true",
                         help="solve ground states absent from the cache instead of failing")
        sub.add_argument("--plot", action="store_true", help="also write PNG figures")
        return sub

    @staticmethod
    def _add_spec(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--spec", choices=["4", "6", "9", "11"], default="4", help="ansatz size")

    @staticmethod
    def _add_codec(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--range-size", type=int, default=config.CODEC_RANGE_SIZE)
        sub.add_argument("--domain-stride", type=int, default=config.CODEC_DOMAIN_STRIDE)
        sub.add_argument("--s-max", type=float, default=config.CODEC_S_MAX)
        sub.add_argument("--iterations", type=int, default=config.CODEC_ITERATIONS)

    def _register_handlers(self):
        """Register all subcommands."""
        ed = self._add_command("ed", self.ed_command, "exact ground state of one sector")
        ed.add_argument("--n", type=int, required=True)
        ed.add_argument("--n-up", type=int, default=None, help="sector (default canonical)")

        weights = self._add_command("weights", self.weights_command, "ansatz weights from exact states")
        self._add_spec(weights)
        weights.add_argument("--n-min", type=int, required=True)
        weights.add_argument("--n-max", type=int, required=True)

        predict = self._add_command("predict", self.predict_command, "AD/AFW energy recursion")
        self._add_spec(predict)
        predict.add_argument("--method", choices=["ad", "afw"], default="ad")
        predict.add_argument("--n-seed", type=int, required=True)
        predict.add_argument("--n-target", type=int, required=True)
        predict.add_argument("--transcription", choices=TRANSCRIPTIONS, default="exact")
        predict.add_argument("--audit", action="store_true", help="log literal-vs-calculus discrepancies")

        reconstruct = self._add_command("reconstruct", self.reconstruct_command, "recursive state reconstruction")
        self._add_spec(reconstruct)
        reconstruct.add_argument("--n-seed", type=int, required=True)
        reconstruct.add_argument("--n-target", type=int, required=True)
        reconstruct.add_argument("--weights", choices=["ad", "fixed"], default="ad")
        reconstruct.add_argument("--transcription", choices=TRANSCRIPTIONS, default="exact")

        qubism = self._add_command("qubism", self.qubism_command, "qubism image of a ground state")
        qubism.add_argument("--n", type=int, required=True)

        codec = self._add_command("codec", self.codec_command, "fractal compression of qubism images")
        codec.add_argument("action", choices=["compress", "decompress", "fidelity"])
        self._add_codec(codec)
        codec.add_argument("--n", type=int, default=None, help="size to compress")
        codec.add_argument("--image", default=None, help="PGM to compress instead of a ground state")
        codec.add_argument("--code", default=None, help="code JSON to decompress")
        codec.add_argument("--target-n", type=int, default=None, help="decompression size")
        codec.add_argument("--n-seed", type=int, default=None)
        codec.add_argument("--n-max", type=int, default=None)

        scan = self._add_command("phase-scan", self.phase_scan_command, "Renyi entropy scan over mu")
        scan.add_argument("--n", type=int, required=True)
        scan.add_argument("--mu-min", type=float, default=-1.5)
        scan.add_argument("--mu-max", type=float, default=0.5)
        scan.add_argument("--mu-step", type=float, default=0.05)
        scan.add_argument("--sector-dimension", action="store_true", help="use the sector size for M")
        scan.add_argument("--images", action="store_true", help="export a qubism PGM per mu")

    # Helpers

    @staticmethod
    def _params(args) -> ModelParams:
        return ModelParams(args.x, args.mu, args.epsilon0)

    @staticmethod
    def _provider(args, allow_compute: bool = True) -> GroundStateProvider:
        return GroundStateProvider(ResultStore(args.cache_dir or config.CACHE_DIR), tol=args.tol, seed=args.seed,
                                   method="dense" if args.dense else "lanczos", allow_compute=allow_compute,
                                   workers=args.workers)

    @staticmethod
    def _out_dir(args) -> str:
        out = args.out or config.OUTPUT_DIR
        os.makedirs(out, exist_ok=True)
        return out

    @staticmethod
    def _write_csv(frame: pd.DataFrame, path: str) -> str:
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        logger.info(f"Wrote {path}")
        return path

    @staticmethod
    def _write_energies_json(frame: pd.DataFrame, spec_name: str, method: str, path: str) -> str:
        series = [{"N": int(row.N), "energy": float(row.energy), "energy_per_site": float(row.energy_per_site),
                   "method": row.method, "ed_energy": None if pd.isna(row.ed_energy) else float(row.ed_energy)}
                  for row in frame.itertuples(index=False)]
        write_json(path, {"spec": spec_name, "method": method, "series": series})
        logger.info(f"Wrote {path}")
        return path

    def _seeds(self, provider: GroundStateProvider, params: ModelParams, n_seed: int):
        provider.require([(m, hamiltonian_sector_for(m)) for m in range(1, n_seed + 1)], params)
        return reference_data(provider, range(1, n_seed + 1), params)

    @staticmethod
    def _cached_energies(provider: GroundStateProvider, params: ModelParams, sizes) -> Dict[int, float]:
        sectors = {n: hamiltonian_sector_for(n) for n in sizes}
        return {n: provider.get(n, params, n_up=k).energy for n, k in sectors.items() if provider.has(n, params, k)}

    # Commands

    def ed_command(self, args, out: str) -> None:
        provider = self._provider(args, allow_compute=True)
        params = self._params(args)
        result = provider.get(args.n, params, n_up=args.n_up)
        print(self.report_formatter.format_ground_state(args.n, result.state.n_up, result.energy,
                                                        result.residual, result.gap, result.degenerate))
        # odd chains also seed the ansatz from the complementary sector
        reference_sector = hamiltonian_sector_for(args.n)
        if args.n_up is None and reference_sector != result.state.n_up:
            reference = provider.get(args.n, params, n_up=reference_sector)
            logger.info(f"Cached ansatz reference sector N={args.n} n_up={reference_sector}: E={reference.energy:.12f}")

    def weights_command(self, args, out: str) -> None:
        spec = get_spec(args.spec)
        params = self._params(args)
        table = weight_series(params, args.n_min, args.n_max, spec, self._provider(args, allow_compute=True))
        table.to_csv(os.path.join(out, "weights.csv"))
        table.to_json(os.path.join(out, "weights.json"))
        deficits = {n: table.coverage_deficit(n, spec) for n in table.sizes() if table.complete_at(n, spec)}
        print(self.report_formatter.format_weights(table.to_frame(), spec.labels, deficits))
        if args.plot:
            self.chart_generator.weights_chart(table.to_plot_frame(spec), os.path.join(out, "weights.png"))

    def predict_command(self, args, out: str) -> None:
        spec = get_spec(args.spec)
        params = self._params(args)
        provider = self._provider(args, allow_compute=args.compute_missing)
        seeds, energies = self._seeds(provider, params, args.n_seed)
        if args.method == "ad":
            result = ad_recursion(spec, params, seeds, energies, args.n_target, args.transcription)
            if args.audit:
                self._audit(spec, params, seeds, energies, result.table, args.n_seed, args.n_target)
        else:
            table = table_from_states(spec, seeds, range(2, args.n_seed + 1))
            fixed = fixed_weights_from(table, spec)
            even = max(n for n in table.sizes() if n % 2 == 0 and table.complete_at(n, spec))
            if not weights_converged(table, spec, even):
                logger.warning(f"AFW seeded at N={even} before the {spec.name} weights converged")
            result = afw_recursion(spec, params, fixed, seeds, energies, args.n_target, args.transcription)
        frame = result.to_frame()
        if frame.empty:
            frame = pd.DataFrame([{"N": args.n_seed, "energy": energies[args.n_seed],
                                   "energy_per_site": energies[args.n_seed] / args.n_seed,
                                   "method": "ED", "spec": spec.name}])
        exact = self._cached_energies(provider, params, frame["N"])
        frame["ed_energy"] = frame["N"].map(exact)
        self._write_csv(frame, os.path.join(out, "energies.csv"))
        self._write_energies_json(frame, spec.name, args.method, os.path.join(out, "energies.json"))
        if result.table is not None:
            result.table.to_csv(os.path.join(out, "weights.csv"))
        print(self.report_formatter.format_energies(frame, exact))
        if args.plot:
            self.chart_generator.energy_chart(frame, os.path.join(out, "energies.png"), exact or None)

    def _audit(self, spec, params, seeds, energies, table, n_seed: int, n_target: int) -> None:
        """Compare the literal matrices with the calculus over the ED-seeded range."""
        calculus = OverlapCalculus(seeds)
        inputs = TableInputs(spec, table_from_states(spec, seeds, range(2, n_seed + 1)), energies)
        total = 0
        for n in range(spec.max_offset + 1, n_seed + 1):
            total += len(audit_reduced_hamiltonian(spec, n, params, inputs, calculus))
        logger.info(f"Audit of {spec.name}: {total} discrepant entries up to N={n_seed}")

    def reconstruct_command(self, args, out: str) -> None:
        spec = get_spec(args.spec)
        params = self._params(args)
        provider = self._provider(args, allow_compute=args.compute_missing)
        seeds, energies = self._seeds(provider, params, args.n_seed)
        if args.weights == "ad":
            weights = ad_recursion(spec, params, seeds, energies, args.n_target, args.transcription).table
        else:
            weights = fixed_weights_from(table_from_states(spec, seeds, range(2, args.n_seed + 1)), spec)
        rows = []
        for n in range(args.n_seed + 1, args.n_target + 1):
            state = to_hamiltonian_frame(reconstruct_state(spec, seeds, weights, n))
            np.save(os.path.join(out, f"state_N{n}.npy"), state.amplitudes)
            value = np.nan
            n_up = hamiltonian_sector_for(n)
            if provider.allow_compute or provider.has(n, params, n_up):
                value = fidelity(state, provider.get(n, params, n_up=n_up).state)
            deficit = np.nan
            if args.weights == "ad":
                deficit = weights.coverage_deficit(n, spec)
            rows.append({"N": n, "fidelity": value, "norm": state.norm(), "deficit": deficit})
            logger.info(f"Reconstructed N={n}: fidelity {value:.8f}")
        frame = pd.DataFrame(rows, columns=["N", "fidelity", "norm", "deficit"])
        self._write_csv(frame, os.path.join(out, "reconstruction.csv"))
        print(frame.to_string(index=False))
        if args.plot and not frame.empty:
            self.chart_generator.fidelity_chart({spec.name: frame.set_index("N")["fidelity"]},
                                                os.path.join(out, "fidelity.png"))

    def qubism_command(self, args, out: str) -> None:
        params = self._params(args)
        result = self._provider(args, allow_compute=True).get(args.n, params)
        image = state_to_qubism(result.state, meta={"x": params.x, "mu": params.mu})
        path = export_pgm(image, os.path.join(out, f"qubism_N{args.n}.pgm"))
        row, col, bitstring = dominant_pixel(image)
        print(f"Wrote {path}; brightest pixel ({row}, {col}) = |{bitstring}>")
        if args.plot:
            self.chart_generator.qubism_chart(image.intensities, os.path.join(out, f"qubism_N{args.n}.png"),
                                              f"N={args.n} x={params.x:g} mu={params.mu:g}")

    def codec_command(self, args, out: str) -> None:
        params = self._params(args)
        if args.action == "compress":
            if args.image is not None:
                image = import_pgm(args.image)
            elif args.n is not None:
                result = self._provider(args, allow_compute=True).get(args.n, params)
                image = state_to_qubism(result.state, meta={"x": params.x, "mu": params.mu})
            else:
                raise InvalidParameterError("codec compress needs --n or --image")
            code = compress(image, args.range_size, args.domain_stride, args.s_max)
            code.save(os.path.join(out, f"code_N{image.n_sites}.json"))
            restored = decompress(code, image.side, args.iterations)
            residuals = range_residuals(image, code)
            print(f"{len(code.mappings)} mappings; PSNR {psnr(image.intensities, restored):.2f} dB; "
                  f"max block residual {residuals.max():.3e}")
        elif args.action == "decompress":
            if args.code is None or args.target_n is None:
                raise InvalidParameterError("codec decompress needs --code and --target-n")
            code = PifsCode.load(args.code)
            pixels = decompress(code, 1 << (args.target_n // 2), args.iterations)
            probs = mask_and_renormalize(pixels, args.target_n)
            self._write_csv(pd.DataFrame({"probability": probs}),
                            os.path.join(out, f"probabilities_N{args.target_n}.csv"))
            decoded = QubismImage(args.target_n, np.clip(pixels, 0.0, None), {"x": params.x, "mu": params.mu})
            export_pgm(decoded, os.path.join(out, f"decoded_N{args.target_n}.pgm"))
            print(f"Decompressed to N={args.target_n} ({len(probs)} sector states)")
        else:
            if args.n_seed is None or args.n_max is None:
                raise InvalidParameterError("codec fidelity needs --n-seed and --n-max")
            frame = codec_fidelity_series(params, args.n_seed, args.n_max, self._provider(args, allow_compute=True),
                                          args.range_size, args.domain_stride, args.s_max, args.iterations)
            self._write_csv(frame, os.path.join(out, "codec_fidelity.csv"))
            print(frame.to_string(index=False))
            if args.plot:
                self.chart_generator.fidelity_chart({"codec": frame.set_index("N")["classical_fidelity"]},
                                                    os.path.join(out, "codec_fidelity.png"), "classical fidelity")

    def phase_scan_command(self, args, out: str) -> None:
        if args.mu_step <= 0 or args.mu_max <= args.mu_min:
            raise InvalidParameterError("Need mu-min < mu-max and a positive mu-step")
        count = int(round((args.mu_max - args.mu_min) / args.mu_step)) + 1
        mu_values = np.round(args.mu_min + args.mu_step * np.arange(count), 12)
        scan = phase_scan(args.x, mu_values, args.n, self._provider(args, allow_compute=True),
                          image_dir=os.path.join(out, "images") if args.images else None,
                          sector_dimension=args.sector_dimension, epsilon0=args.epsilon0)
        scan.to_csv(os.path.join(out, "phase_scan.csv"))
        transition = scan.transition_mu()
        print(self.report_formatter.format_scan(scan.frame, transition, scan.dominant_switches()))
        if args.plot:
            self.chart_generator.entropy_chart(scan.frame, os.path.join(out, "phase_scan.png"), transition)

    # Dispatch

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Parse argv, run the command and return its exit code."""
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_USAGE
        try:
            run_config = RunConfig.from_args(args)
            run_config.validate()
            out = self._out_dir(args)
            run_config.save(out)
            args.handler(args, out)
            return EXIT_OK
        except tuple(EXIT_CODES) as e:
            code = next(code for kind, code in EXIT_CODES.items() if isinstance(e, kind))
            logger.error(f"Error in {args.command} command: {e}")
            return code
        except Exception as e:
            logger.error(f"Unexpected error in {args.command} command: {e}", exc_info=True)
            return EXIT_FAILURE


def main():
    """Main function to run the command line."""
    setup_logging(config.LOG_FILE, config.LOG_LEVEL)
    sys.exit(FractalCLI().run())
