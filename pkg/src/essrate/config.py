"""Experiment configuration: flat ``key = value`` text with dotted keys.

Example::

    problem.id = power_law
    problem.p = 3
    tableau.id = rk4
    controller.mode = capped
    controller.theta = 0.9
    y0 = 1, 1
    stop.max_steps = 1000
    rescaling.kind = power
    rescaling.p = 1.5
    output.prefix = out/p3

Blank lines and ``#`` comments are ignored; unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .integrator import StepController, Stop
from .rescaling import TimeRescaling, standard_rescaling
from .stability import ButcherTableau, get_tableau
from .systems import Problem, catalog_problem, eta_linear, eta_power


def parse_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _num(value: str) -> float | str:
    try:
        return float(value)
    except ValueError:
        return value


def _float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _floats(key: str, value: str) -> tuple[float, ...]:
    return tuple(_float(key, v) for v in value.split(",") if v.strip())


def _strs(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


@dataclass(frozen=True)
class ProblemSpec:
    id: str
    params: dict[str, float | str] = field(default_factory=dict)

    def build(self) -> Problem:
        params: dict[str, Any] = dict(self.params)
        if self.id == "wibisono":
            kind = params.pop("eta", None)
            if kind == "power":
                params["eta"], params["eta_dot"] = eta_power(float(params.pop("eta_p", 2.0)))
            elif kind == "linear":
                params["eta"], params["eta_dot"] = eta_linear(float(params.pop("eta_c", 1.0)))
            else:
                raise ConfigError("wibisono needs problem.eta = power | linear")
        return catalog_problem(self.id, params)


@dataclass(frozen=True)
class TableauSpec:
    id: str | None = "rk4"
    a: tuple[str, ...] = ()
    b: tuple[str, ...] = ()
    c: tuple[str, ...] = ()
    stages: int | None = None

    def build(self) -> ButcherTableau:
        if self.stages is None:
            return get_tableau(self.id)
        s = self.stages
        if len(self.a) != s * s or len(self.b) != s or (self.c and len(self.c) != s):
            raise ConfigError("inline tableau needs stages*stages entries in a and stages in b, c")
        rows = [self.a[i * s:(i + 1) * s] for i in range(s)]
        return ButcherTableau.from_rows(self.id or "inline", rows, self.b, self.c or None)


@dataclass(frozen=True)
class AnalysisSpec:
    model: str = "auto"
    envelope: str = "none"
    window_fraction: float = 0.5
    k0: int = 0


@dataclass(frozen=True)
class CheckSpec:
    checkpoints: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0)
    tol: float = 1e-6
    h_ref: float = 1e-3
    t0: float | None = None


@dataclass(frozen=True)
class ProperSpec:
    t_lo: float = 1.0
    t_hi: float = 1e4
    n_samples: int = 50
    kappa: float = 10.0
    source: str = "exact"
    t_start: float | None = None
    theta: float = 0.5


@dataclass(frozen=True)
class SweepSpec:
    key: str
    values: tuple[str, ...]
    jobs: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    tableau: TableauSpec = TableauSpec()
    controller: StepController = StepController.capped()
    t0: float | None = None
    y0: tuple[float, ...] | None = None
    stop: Stop = Stop(max_steps=1000)
    rescaling: tuple[str, dict[str, float]] | None = None
    target: ProblemSpec | None = None
    analysis: AnalysisSpec = AnalysisSpec()
    check: CheckSpec = CheckSpec()
    proper: ProperSpec = ProperSpec()
    sweep: SweepSpec | None = None
    output_prefix: str = "essrate_out"
    divergence_limit: float = 1e12
    stall_limit: float = 1e-14

    # -- construction -------------------------------------------------------

    @classmethod
    def from_mapping(cls, m: dict[str, str]) -> "ExperimentConfig":
        m = dict(m)
        pop = m.pop
        if "problem.id" not in m:
            raise ConfigError("missing required key problem.id")

        def section(prefix: str) -> dict[str, str]:
            keys = [k for k in m if k.startswith(prefix + ".")]
            return {k[len(prefix) + 1:]: pop(k) for k in keys}

        prob = section("problem")
        problem = ProblemSpec(prob.pop("id"), {k: _num(v) for k, v in prob.items()})
        target = None
        tgt = section("target")
        if tgt:
            if "id" not in tgt:
                raise ConfigError("target section needs target.id")
            target = ProblemSpec(tgt.pop("id"), {k: _num(v) for k, v in tgt.items()})

        tab = section("tableau")
        if "stages" in tab:
            tableau = TableauSpec(
                tab.pop("id", "inline"),
                _strs(tab.pop("a", "")),
                _strs(tab.pop("b", "")),
                _strs(tab.pop("c", "")),
                _int("tableau.stages", tab.pop("stages")),
            )
        else:
            tableau = TableauSpec(tab.pop("id", "rk4"))
        _reject(tab, "tableau")

        ctl = section("controller")
        mode = ctl.pop("mode", "capped")
        try:
            if mode == "fixed":
                if "h" not in ctl:
                    raise ConfigError("controller.mode = fixed needs controller.h")
                controller = StepController.fixed(_float("controller.h", ctl.pop("h")))
            else:
                controller = StepController(
                    mode,
                    theta=_float("controller.theta", ctl.pop("theta", "0.9")),
                    h_max_abs=_float("controller.h_max_abs", ctl.pop("h_max_abs", "10.0")),
                )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        _reject(ctl, "controller")

        st = section("stop")
        try:
            stop = cls.stop if not st else Stop(
                _int("stop.max_steps", st.pop("max_steps")) if "max_steps" in st else None,
                _float("stop.t_end", st.pop("t_end")) if "t_end" in st else None,
                _float("stop.gap_below", st.pop("gap_below")) if "gap_below" in st else None,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        _reject(st, "stop")

        rs = section("rescaling")
        rescaling = None
        if rs:
            if "kind" not in rs:
                raise ConfigError("rescaling section needs rescaling.kind")
            kind = rs.pop("kind")
            rescaling = (kind, {k: _float(f"rescaling.{k}", v) for k, v in rs.items()})

        an = section("analysis")
        analysis = AnalysisSpec(
            an.pop("model", "auto"),
            an.pop("envelope", "none"),
            _float("analysis.window_fraction", an.pop("window_fraction", "0.5")),
            _int("analysis.k0", an.pop("k0", "0")),
        )
        _reject(an, "analysis")
        if analysis.model not in ("auto", "power", "exponential", "none"):
            raise ConfigError(f"analysis.model: unknown model {analysis.model!r}")
        if analysis.envelope not in ("none", "min", "upper"):
            raise ConfigError(f"analysis.envelope: unknown envelope {analysis.envelope!r}")

        ck = section("check")
        check = CheckSpec(
            _floats("check.checkpoints", ck.pop("checkpoints")) if "checkpoints" in ck else CheckSpec.checkpoints,
            _float("check.tol", ck.pop("tol", "1e-6")),
            _float("check.h_ref", ck.pop("h_ref", "0.001")),
            _float("check.t0", ck.pop("t0")) if "t0" in ck else None,
        )
        _reject(ck, "check")

        pr = section("proper")
        proper = ProperSpec(
            _float("proper.t_lo", pr.pop("t_lo", "1.0")),
            _float("proper.t_hi", pr.pop("t_hi", "10000.0")),
            _int("proper.n_samples", pr.pop("n_samples", "50")),
            _float("proper.kappa", pr.pop("kappa", "10.0")),
            pr.pop("source", "exact"),
            _float("proper.t_start", pr.pop("t_start")) if "t_start" in pr else None,
            _float("proper.theta", pr.pop("theta", "0.5")),
        )
        _reject(pr, "proper")

        sw = section("sweep")
        sweep = None
        if sw:
            if "key" not in sw or "values" not in sw:
                raise ConfigError("sweep needs sweep.key and sweep.values")
            sweep = SweepSpec(sw.pop("key"), _strs(sw.pop("values")), _int("sweep.jobs", sw.pop("jobs", "1")))
            _reject(sw, "sweep")

        out = section("output")
        prefix = out.pop("prefix", "essrate_out")
        _reject(out, "output")
        guard = section("guard")
        divergence = _float("guard.divergence", guard.pop("divergence", "1e12"))
        stall = _float("guard.stall", guard.pop("stall", "1e-14"))
        _reject(guard, "guard")

        t0 = _float("t0", pop("t0")) if "t0" in m else None
        y0 = _floats("y0", pop("y0")) if "y0" in m else None
        _reject(m, None)

        return cls(
            problem, tableau, controller, t0, y0, stop, rescaling, target, analysis,
            check, proper, sweep, prefix, divergence, stall,
        )

    def to_mapping(self) -> dict[str, str]:
        m: dict[str, str] = {"problem.id": self.problem.id}
        for k, v in self.problem.params.items():
            m[f"problem.{k}"] = _fmt(v)
        if self.target is not None:
            m["target.id"] = self.target.id
            for k, v in self.target.params.items():
                m[f"target.{k}"] = _fmt(v)
        if self.tableau.stages is None:
            m["tableau.id"] = str(self.tableau.id)
        else:
            m["tableau.id"] = str(self.tableau.id)
            m["tableau.stages"] = str(self.tableau.stages)
            m["tableau.a"] = _fmt(self.tableau.a)
            m["tableau.b"] = _fmt(self.tableau.b)
            if self.tableau.c:
                m["tableau.c"] = _fmt(self.tableau.c)
        c = self.controller
        m["controller.mode"] = c.mode
        if c.mode == "fixed":
            m["controller.h"] = _fmt(float(c.h))
        else:
            m["controller.theta"] = _fmt(float(c.theta))
            m["controller.h_max_abs"] = _fmt(float(c.h_max_abs))
        if self.t0 is not None:
            m["t0"] = _fmt(float(self.t0))
        if self.y0 is not None:
            m["y0"] = _fmt(tuple(float(v) for v in self.y0))
        for name in ("max_steps", "t_end", "gap_below"):
            v = getattr(self.stop, name)
            if v is not None:
                m[f"stop.{name}"] = _fmt(v)
        if self.rescaling is not None:
            kind, params = self.rescaling
            m["rescaling.kind"] = kind
            for k, v in params.items():
                m[f"rescaling.{k}"] = _fmt(float(v))
        a = self.analysis
        m["analysis.model"] = a.model
        m["analysis.envelope"] = a.envelope
        m["analysis.window_fraction"] = _fmt(float(a.window_fraction))
        m["analysis.k0"] = str(a.k0)
        ck = self.check
        m["check.checkpoints"] = _fmt(tuple(float(v) for v in ck.checkpoints))
        m["check.tol"] = _fmt(float(ck.tol))
        m["check.h_ref"] = _fmt(float(ck.h_ref))
        if ck.t0 is not None:
            m["check.t0"] = _fmt(float(ck.t0))
        pr = self.proper
        m["proper.t_lo"] = _fmt(float(pr.t_lo))
        m["proper.t_hi"] = _fmt(float(pr.t_hi))
        m["proper.n_samples"] = str(pr.n_samples)
        m["proper.kappa"] = _fmt(float(pr.kappa))
        m["proper.source"] = pr.source
        if pr.t_start is not None:
            m["proper.t_start"] = _fmt(float(pr.t_start))
        m["proper.theta"] = _fmt(float(pr.theta))
        if self.sweep is not None:
            m["sweep.key"] = self.sweep.key
            m["sweep.values"] = _fmt(self.sweep.values)
            m["sweep.jobs"] = str(self.sweep.jobs)
        m["output.prefix"] = self.output_prefix
        m["guard.divergence"] = _fmt(float(self.divergence_limit))
        m["guard.stall"] = _fmt(float(self.stall_limit))
        return m

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.to_mapping().items()))

    # -- resolution ---------------------------------------------------------

    def build_problem(self) -> Problem:
        return self.problem.build()

    def build_rescaling(self) -> TimeRescaling | None:
        if self.rescaling is None:
            return None
        kind, params = self.rescaling
        return standard_rescaling(kind, **params)

    def resolve(self, problem: Problem) -> "ExperimentConfig":
        """Fill in the start point from the problem defaults."""
        t0 = problem.recommended_t0 if self.t0 is None else self.t0
        y0 = tuple([1.0] * problem.dim) if self.y0 is None else self.y0
        return replace(self, t0=t0, y0=y0)

    def with_value(self, key: str, value: str) -> "ExperimentConfig":
        m = self.to_mapping()
        m[key] = value
        return ExperimentConfig.from_mapping(m)


def _reject(rest: dict[str, str], prefix: str | None) -> None:
    if rest:
        keys = sorted(rest) if prefix is None else sorted(f"{prefix}.{k}" for k in rest)
        raise ConfigError(f"unknown config keys: {', '.join(keys)}")


def loads(text: str) -> ExperimentConfig:
    return ExperimentConfig.from_mapping(parse_text(text))


def load(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return loads(text)
