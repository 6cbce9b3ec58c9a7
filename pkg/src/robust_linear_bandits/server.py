"""MCP tool server exposing the experiment runner, the checks and the lower-bound pair."""

import logging
from contextlib import asynccontextmanager
from typing import Any, Dict, List, Optional

from mcp.server.fastmcp import FastMCP

from . import __version__
from .config import load_config, parse_seeds
from .exceptions import ConfigurationError, ContractError, EpisodeError, FileSystemError, NumericalError
from .environment import PRNG_FAMILY
from .harness import paired_lower_bound_run
from .logging_setup import configure_logging
from .policies import PolicyKind, PolicyState
from .storage import ResultStore
from .study import TOOL_NAME, ExperimentRunner, write_lower_bound

logger = logging.getLogger(__name__)


class BanditLabMCPServer:
    """MCP server for running corruption-robust bandit studies."""

    def __init__(self, output_root: Optional[str] = None, jobs: int = 1, debug: bool = False):
        """Initialize the server.

        Args:
            output_root: Default parent directory for results (a config's own output_dir wins)
            jobs: Worker processes per study
            debug: Enable debug logging
        """
        if debug:
            logging.getLogger().setLevel(logging.DEBUG)

        self.output_root = output_root
        self.jobs = jobs

        @asynccontextmanager
        async def lifespan(server: FastMCP):
            logger.info("Robust linear bandits MCP server starting")
            logger.info(f"Output root: {self.output_root or 'per configuration'}")
            yield
            logger.info("Robust linear bandits MCP server shutting down")

        self.mcp = FastMCP(
            TOOL_NAME,
            instructions="Run corruption-robust linear bandit studies, check their inequalities and run the lower-bound pair",
            lifespan=lifespan,
        )
        self._register_tools()

    def _out(self, name: str, out: Optional[str]) -> Optional[str]:
        if out:
            return out
        if self.output_root:
            return f"{self.output_root.rstrip('/')}/{name}"
        return None

    def run_experiment(self, config_path: str, seeds: Optional[str] = None, out: Optional[str] = None) -> Dict[str, Any]:
        """Run a configuration; returns the final mean regret per cell and policy."""
        config = load_config(config_path).with_overrides(seeds=parse_seeds(seeds) if seeds else None)
        store = ResultStore(config.output_dir(self._out(config.experiment.name, out)))
        cells = ExperimentRunner(config, self.jobs).run(store)
        summary: List[Dict[str, Any]] = []
        for cell in cells:
            for policy_name in cell.episodes:
                curve = cell.curve(policy_name)
                summary.append(
                    {
                        "cell": cell.plan.cell.name,
                        "policy": policy_name,
                        "mean_regret": float(curve.mean[-1]),
                        "std_regret": float(curve.std[-1]),
                        "num_seeds": curve.num_seeds,
                    }
                )
        return {"success": True, "output_dir": str(store.root), "results": summary}

    def check_experiment(self, config_path: str, seeds: Optional[str] = None, out: Optional[str] = None) -> Dict[str, Any]:
        """Run a configuration with the diagnostic checks; lists every failed hard check."""
        config = load_config(config_path).with_overrides(seeds=parse_seeds(seeds) if seeds else None)
        store = ResultStore(config.output_dir(self._out(config.experiment.name, out)))
        _, report = ExperimentRunner(config, self.jobs).check(store)
        failures = [
            {"check": c.name, "policy": c.policy, "seed": c.seed, "value": float(c.value), "bound": float(c.bound)}
            for c in report.hard_failures
        ]
        rates = [
            {"check": r.name, "policy": r.policy, "rate": r.rate, "delta": r.delta, "within_delta": r.within_delta}
            for r in report.rates
        ]
        return {
            "success": True,
            "output_dir": str(store.root),
            "all_passed": report.all_hard_passed,
            "checks_run": len(report.checks),
            "failures": failures,
            "rates": rates,
        }

    def run_lower_bound(
        self, d: int, budget: float, policy: str = PolicyKind.CW_OFUL.value, K: int = 1000, seed: int = 0,
        out: Optional[str] = None,
    ) -> Dict[str, Any]:
        """Run the paired lower-bound instances and report indistinguishability and the regret bound."""
        report = paired_lower_bound_run(d, budget, policy, K, seed)
        target = self._out(f"lowerbound_d{d}_b{budget:g}", out)
        output_dir = None
        if target:
            store = ResultStore(target)
            write_lower_bound(store, report)
            output_dir = str(store.root)
        return {"success": True, "output_dir": output_dir, "report": report.to_dict()}

    def describe_config(self, config_path: str) -> Dict[str, Any]:
        """Validate a configuration and show the derived quantities of every cell and policy."""
        config = load_config(config_path)
        cells = []
        for cell in config.cells():
            plan = config.materialize(cell)
            cells.append(
                {
                    "cell": cell.name,
                    "horizon": cell.horizon,
                    "dim": cell.dim,
                    "budget": plan.adversary.budget,
                    "policies": {p.name: PolicyState(p, plan.instance.dim).derived() for p in plan.policies},
                }
            )
        return {"success": True, "config": config.to_dict(), "cells": cells}

    def _register_tools(self) -> None:
        """Register all MCP tools."""

        @self.mcp.tool()
        def run_experiment(config_path: str, seeds: Optional[str] = None, out: Optional[str] = None) -> Dict[str, Any]:
            """Run every episode of a YAML experiment configuration.

            Args:
                config_path: Path to the YAML configuration
                seeds: Optional seed override, "0,1,5" or "start:count"
                out: Optional output directory

            Returns:
                Dictionary with the output directory and mean regret per cell and policy
            """
            try:
                return self.run_experiment(config_path, seeds, out)
            except Exception as e:
                return self._handle_error(e)

        @self.mcp.tool()
        def check_experiment(config_path: str, seeds: Optional[str] = None, out: Optional[str] = None) -> Dict[str, Any]:
            """Run a configuration and check the per-run inequalities and violation rates.

            Args:
                config_path: Path to the YAML configuration
                seeds: Optional seed override
                out: Optional output directory

            Returns:
                Dictionary with pass/fail status, failed checks and violation rates
            """
            try:
                return self.check_experiment(config_path, seeds, out)
            except Exception as e:
                return self._handle_error(e)

        @self.mcp.tool()
        def run_lower_bound(
            d: int, budget: float, policy: str = PolicyKind.CW_OFUL.value, K: int = 1000, seed: int = 0,
            out: Optional[str] = None,
        ) -> Dict[str, Any]:
            """Run one policy on the paired lower-bound instances.

            Args:
                d: Dimension (>= 2)
                budget: Budget parameter; the flip budget is 4 * budget / (d - 1)
                policy: cw_oful, oful, enlarged_beta_oful or greedy
                K: Horizon
                seed: Shared episode seed
                out: Optional output directory for the per-round logs

            Returns:
                Dictionary with the paired report
            """
            try:
                return self.run_lower_bound(d, budget, policy, K, seed, out)
            except Exception as e:
                return self._handle_error(e)

        @self.mcp.tool()
        def describe_config(config_path: str) -> Dict[str, Any]:
            """Validate a configuration and list the derived beta, alpha and lambda per policy."""
            try:
                return self.describe_config(config_path)
            except Exception as e:
                return self._handle_error(e)

        @self.mcp.tool()
        def get_server_info() -> Dict[str, Any]:
            """Get information about this server and its capabilities."""
            return {
                "success": True,
                "name": TOOL_NAME,
                "version": __version__,
                "prng": PRNG_FAMILY,
                "policies": [k.value for k in PolicyKind],
                "output_root": self.output_root,
                "capabilities": [
                    "Weighted OFUL with corruption-aware weights",
                    "Budgeted reward-corruption adversaries",
                    "Per-run inequality checks",
                    "Paired lower-bound instances",
                ],
            }

    def _handle_error(self, error: Exception) -> Dict[str, Any]:
        """Handle errors and return appropriate response.

        Args:
            error: Exception that occurred

        Returns:
            Error response dictionary
        """
        error_type = type(error).__name__
        error_message = str(error)
        logger.error(f"{error_type}: {error_message}")

        if isinstance(error, ConfigurationError):
            summary = "Invalid configuration"
        elif isinstance(error, EpisodeError):
            summary = "Episode failed"
        elif isinstance(error, NumericalError):
            summary = "Numerical failure in the regression state"
        elif isinstance(error, ContractError):
            summary = "Invalid arguments"
        elif isinstance(error, FileSystemError):
            summary = "File system operation failed"
        else:
            summary = "An unexpected error occurred"
        response = {"success": False, "error_type": error_type, "error": summary, "details": error_message}
        if isinstance(error, EpisodeError):
            response["episode"] = error.to_dict()
        return response

    def run(self) -> None:
        """Start the MCP server."""
        try:
            logger.info("Starting robust linear bandits MCP server...")
            self.mcp.run()
        except KeyboardInterrupt:
            logger.info("Server interrupted by user")
        except Exception as e:
            logger.error(f"Server error: {e}")
            raise


def main():
    """Main entry point for the server."""
    import argparse

    parser = argparse.ArgumentParser(
        description="Robust linear bandits MCP server",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s                              # Results go where each config says
  %(prog)s --output-root /data/runs     # Default parent directory for results
  %(prog)s --jobs 4 --debug             # Parallel episodes, debug logging
        """,
    )
    parser.add_argument("--output-root", help="Default parent directory for results")
    parser.add_argument("--jobs", type=int, default=1, help="Worker processes per study")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    args = parser.parse_args()

    configure_logging(logging.DEBUG if args.debug else logging.INFO, enable_colors=False)
    try:
        server = BanditLabMCPServer(output_root=args.output_root, jobs=args.jobs, debug=args.debug)
        server.run()
    except Exception as e:
        logger.error(f"Failed to start server: {e}")
        exit(1)


if __name__ == "__main__":
    main()
