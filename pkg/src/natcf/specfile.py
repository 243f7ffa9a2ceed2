"""Read and write SCM declaration files.

The format is a TOML-compatible subset: a top-level ``variables`` list in
declaration order, then one table per variable::

    variables = ["n1", "n2"]

    [n1]
    parents = []
    mechanism = "u"
    noise = "standard_normal"

    [n2]
    parents = ["n1"]
    mechanism = "-n1 + (1/3)*u"
    noise = "standard_normal"
"""

from __future__ import annotations

import re

from .errors import DataError
from .graph import CausalGraph
from .mechanisms import parse_mechanism
from .scm import Scm

_SECTION_RE = re.compile(r"^\[([A-Za-z_][A-Za-z_0-9]*)\]$")
_KEY_RE = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(.+)$")


def _parse_value(raw: str, where: str):
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        parts = [p.strip() for p in inner.split(",")]
        return [_parse_value(p, where) for p in parts if p]
    if len(raw) >= 2 and raw[0] == '"' and raw[-1] == '"':
        return raw[1:-1]
    raise DataError(f"{where}: expected a quoted string or list, got {raw!r}")


def parse_spec_text(text: str, source: str = "<spec>") -> dict:
    top: dict = {}
    tables: dict[str, dict] = {}
    current: dict | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        where = f"{source}:{lineno}"
        m = _SECTION_RE.match(stripped)
        if m:
            name = m.group(1)
            if name in tables:
                raise DataError(f"{where}: duplicate section [{name}]")
            current = {}
            tables[name] = current
            continue
        m = _KEY_RE.match(stripped)
        if m is None:
            raise DataError(f"{where}: cannot parse line {stripped!r}")
        key, raw = m.group(1), m.group(2)
        value = _parse_value(raw, where)
        (top if current is None else current)[key] = value
    top["_tables"] = tables
    return top


def read_scm(path) -> Scm:
    with open(path) as fh:
        text = fh.read()
    spec = parse_spec_text(text, source=str(path))
    if "variables" not in spec:
        raise DataError(f"{path}: missing top-level 'variables' list")
    variables = spec["variables"]
    tables = spec["_tables"]
    parents = {}
    mech_text = {}
    noise_name = {}
    for name in variables:
        if name not in tables:
            raise DataError(f"{path}: no [{name}] table")
        table = tables[name]
        for key in ("parents", "mechanism"):
            if key not in table:
                raise DataError(f"{path}: [{name}] is missing {key!r}")
        parents[name] = tuple(table["parents"])
        mech_text[name] = table["mechanism"]
        noise_name[name] = table.get("noise", "standard_normal")
    graph = CausalGraph(tuple(variables), parents)
    mechanisms = {
        name: parse_mechanism(mech_text[name], parents[name], noise=noise_name[name])
        for name in variables
    }
    return Scm(graph, mechanisms)


def write_scm(scm: Scm, path) -> None:
    lines = []
    names = ", ".join(f'"{n}"' for n in scm.graph.nodes)
    lines.append(f"variables = [{names}]")
    for name in scm.graph.nodes:
        mech = scm.mechanisms[name]
        lines.append("")
        lines.append(f"[{name}]")
        plist = ", ".join(f'"{p}"' for p in mech.parent_order)
        lines.append(f"parents = [{plist}]")
        lines.append(f'mechanism = "{mech.to_text()}"')
        lines.append(f'noise = "{mech.noise.name}"')
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
