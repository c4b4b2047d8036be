"""JSON model files.

A file lists variables in causal order, directed edges with coefficients,
bidirected edges with error covariances, error variances, optional
intercepts and optional nonlinear vertices. Coefficients, covariances and
variances may all be omitted, giving a graph-only file that the graphical
commands accept. Files with nonlinear vertices are always graph-only: they
describe the projected causal path diagram.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ModelError
from .graph import Admg, project_nonlinear
from .sem import SemModel


class ModelFileError(ModelError):
    """Malformed or inconsistent model file."""


TOP_KEYS = ("variables", "edges", "bidirected", "error_var", "intercepts", "nonlinear")
EDGE_KEYS = ("from", "to", "coef")
BI_KEYS = ("a", "b", "cov")
NL_KEYS = ("name", "function", "args", "independent")


def _check_keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise ModelFileError(f"{where} must be an object")
    unknown = [k for k in obj if k not in allowed]
    if unknown:
        raise ModelFileError(f"unknown key(s) {unknown} in {where}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ModelFileError(f"missing key(s) {missing} in {where}")


def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ModelFileError(f"{where} must be a number")
    return float(x)


@dataclass
class ModelFile:
    variables: list
    edges: list = field(default_factory=list)
    bidirected: list = field(default_factory=list)
    error_var: dict | None = None
    intercepts: dict | None = None
    nonlinear: list | None = None

    @classmethod
    def from_dict(cls, d) -> "ModelFile":
        _check_keys(d, TOP_KEYS, "model file", required=("variables",))
        variables = d["variables"]
        if not isinstance(variables, list) or not all(isinstance(v, str) for v in variables):
            raise ModelFileError("variables must be a list of names")
        edges = []
        for k, e in enumerate(d.get("edges", [])):
            _check_keys(e, EDGE_KEYS, f"edges[{k}]", required=("from", "to"))
            item = {"from": e["from"], "to": e["to"]}
            if "coef" in e:
                item["coef"] = _number(e["coef"], f"edges[{k}].coef")
            edges.append(item)
        bidirected = []
        for k, e in enumerate(d.get("bidirected", [])):
            _check_keys(e, BI_KEYS, f"bidirected[{k}]", required=("a", "b"))
            item = {"a": e["a"], "b": e["b"]}
            if "cov" in e:
                item["cov"] = _number(e["cov"], f"bidirected[{k}].cov")
            bidirected.append(item)
        error_var = None
        if "error_var" in d:
            _check_keys(d["error_var"], variables, "error_var")
            error_var = {k: _number(v, f"error_var.{k}") for k, v in d["error_var"].items()}
        intercepts = None
        if "intercepts" in d:
            _check_keys(d["intercepts"], variables, "intercepts")
            intercepts = {k: _number(v, f"intercepts.{k}") for k, v in d["intercepts"].items()}
        nonlinear = None
        if "nonlinear" in d:
            nonlinear = []
            for k, e in enumerate(d["nonlinear"]):
                _check_keys(e, NL_KEYS, f"nonlinear[{k}]", required=("name", "function", "args"))
                item = {"name": e["name"], "function": e["function"], "args": list(e["args"])}
                if "independent" in e:
                    item["independent"] = list(e["independent"])
                nonlinear.append(item)
        return cls(variables, edges, bidirected, error_var, intercepts, nonlinear)

    @classmethod
    def loads(cls, text: str) -> "ModelFile":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFileError(f"not valid JSON: {exc}") from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        out = {"variables": list(self.variables), "edges": self.edges, "bidirected": self.bidirected}
        if self.error_var is not None:
            out["error_var"] = self.error_var
        if self.intercepts is not None:
            out["intercepts"] = self.intercepts
        if self.nonlinear is not None:
            out["nonlinear"] = self.nonlinear
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @property
    def has_parameters(self) -> bool:
        return (
            not self.nonlinear
            and self.error_var is not None
            and all("coef" in e for e in self.edges)
            and all("cov" in e for e in self.bidirected)
        )

    def base_graph(self) -> Admg:
        return Admg(
            tuple(self.variables),
            tuple((e["from"], e["to"]) for e in self.edges),
            tuple((e["a"], e["b"]) for e in self.bidirected),
        )

    def graph(self) -> Admg:
        g = self.base_graph()
        if not self.nonlinear:
            return g
        nl = [(e["name"], e["args"]) for e in self.nonlinear]
        indep = [(e["name"], w) for e in self.nonlinear for w in e.get("independent", [])]
        return project_nonlinear(g, nl, indep)

    def model(self) -> SemModel:
        if self.nonlinear:
            raise ModelFileError("files with nonlinear vertices describe a graph only")
        if not self.has_parameters:
            raise ModelFileError("file lacks coefficients, covariances or error variances")
        g = self.base_graph()
        missing = [v for v in self.variables if v not in self.error_var]
        if missing:
            raise ModelFileError(f"error_var missing for {missing}")
        return SemModel.from_params(
            g,
            {(e["from"], e["to"]): e["coef"] for e in self.edges},
            self.error_var,
            {(e["a"], e["b"]): e["cov"] for e in self.bidirected},
            self.intercepts,
        )

    @classmethod
    def from_model(cls, m: SemModel) -> "ModelFile":
        g = m.graph
        names = list(g.names)
        edges = [{"from": names[a], "to": names[b], "coef": float(m.A[b, a])} for a, b in g.directed]
        bi = [{"a": names[a], "b": names[b], "cov": float(m.Sigma[a, b])} for a, b in g.bidirected]
        ev = {v: float(m.Sigma[k, k]) for k, v in enumerate(names)}
        icpt = {v: float(m.c[k]) for k, v in enumerate(names)} if m.c.any() else None
        return cls(names, edges, bi, ev, icpt)
