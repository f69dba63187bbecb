"""
roadcast — Text formats
Line-oriented readers and writers for networks with candidate sites,
movement paths, deployments, scenarios and mobility traces. Blank lines
and `#` comments (at line start or after whitespace) are ignored.
Grammar reference: docs/FORMATS.md.
"""
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .config import DEFAULT_COST, DEFAULT_DENSITY_INTERVAL, DEFAULT_RATE_INTERVAL, DEFAULT_SPEED_INTERVAL, EPS_GEO
from .errors import InputError, ParseError, UnknownIdError
from .geometry import (
    CandidateSite,
    Disk,
    FourSector,
    Point,
    PolygonRegion,
    RoadEdge,
    RoadNetwork,
    RoadNode,
    natural_key,
    sorted_ids,
)
from .paths import MovementPath, MovementSet
from .scenario import Scenario
from .simulator import MobilityTrace, TraceSegment

log = logging.getLogger(__name__)

SITE_KEYWORDS = {"cost", "cost2", "rate"}
_COMMENT = re.compile(r"(?:^|\s)#.*$")


def _lines(text: str) -> Iterator[Tuple[int, List[str]]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = _COMMENT.sub("", raw).split()
        if tokens:
            yield lineno, tokens


def _num(token: str, lineno: int, what: str) -> float:
    try:
        x = float(token)
    except ValueError:
        raise ParseError(f"{what}: expected a number, got {token!r}", lineno) from None
    if not math.isfinite(x):
        raise ParseError(f"{what}: non-finite value {token!r}", lineno)
    return x


def _fmt(x: float) -> str:
    return repr(float(x))


def _at(exc: ParseError, lineno: int) -> ParseError:
    if exc.line is not None:
        return exc
    return type(exc)(str(exc), lineno)


# ─── Network + sites ──────────────────────────────────────────────────────────

@dataclass
class NetworkFile:
    network: RoadNetwork
    sites: List[CandidateSite] = field(default_factory=list)


def _parse_edge(tokens: List[str], lineno: int) -> Tuple[tuple, Optional[float]]:
    if len(tokens) < 4:
        raise ParseError("edge needs <id> <nodeA> <nodeB>", lineno)
    edge_id, a, b = tokens[1:4]
    rest = tokens[4:]
    length = None
    if "length" in rest:
        k = rest.index("length")
        if k + 1 >= len(rest):
            raise ParseError(f"edge {edge_id}: length needs a value", lineno)
        length = _num(rest[k + 1], lineno, f"edge {edge_id} length")
        rest = rest[:k] + rest[k + 2:]
    values = [_num(t, lineno, f"edge {edge_id}") for t in rest]
    if len(values) not in (0, 2, 4):
        raise ParseError(f"edge {edge_id}: expected [v1 v2] [h1 h2], got {len(values)} numbers", lineno)
    speed = tuple(values[0:2]) if len(values) >= 2 else DEFAULT_SPEED_INTERVAL
    density = tuple(values[2:4]) if len(values) == 4 else DEFAULT_DENSITY_INTERVAL
    # the real length is filled in once node positions are known
    return (edge_id, a, b, speed, density), length


def _parse_site(tokens: List[str], lineno: int) -> CandidateSite:
    if len(tokens) < 5:
        raise ParseError("site needs <id> <x> <y> <shape> ...", lineno)
    site_id = tokens[1]
    center = Point(_num(tokens[2], lineno, site_id), _num(tokens[3], lineno, site_id))
    shape = tokens[4]
    i = 5

    def take(n: int, what: str) -> List[float]:
        nonlocal i
        if i + n > len(tokens):
            raise ParseError(f"site {site_id}: {what} needs {n} values", lineno)
        out = [_num(t, lineno, f"site {site_id} {what}") for t in tokens[i:i + n]]
        i += n
        return out

    try:
        if shape == "disk":
            region = Disk(center, take(1, "disk")[0])
        elif shape == "sectors":
            region = FourSector(center, tuple(take(4, "sectors")))
        elif shape == "poly":
            coords = []
            while i < len(tokens) and tokens[i] not in SITE_KEYWORDS:
                coords.append(_num(tokens[i], lineno, f"site {site_id} poly"))
                i += 1
            if len(coords) % 2:
                raise ParseError(f"site {site_id}: poly needs x y pairs", lineno)
            region = PolygonRegion(tuple(Point(coords[k], coords[k + 1]) for k in range(0, len(coords), 2)))
        else:
            raise ParseError(f"site {site_id}: unknown shape {shape!r}", lineno)

        attrs = {"cost": DEFAULT_COST, "first_stage_cost": None, "second_stage_cost": None,
                 "rate_interval": DEFAULT_RATE_INTERVAL}
        while i < len(tokens):
            key = tokens[i]
            i += 1
            if key == "cost":
                attrs["cost"] = take(1, "cost")[0]
            elif key == "cost2":
                attrs["first_stage_cost"], attrs["second_stage_cost"] = take(2, "cost2")
                if "cost" not in tokens:
                    attrs["cost"] = attrs["first_stage_cost"]
            elif key == "rate":
                attrs["rate_interval"] = tuple(take(2, "rate"))
            else:
                raise ParseError(f"site {site_id}: unknown attribute {key!r}", lineno)
        return CandidateSite(site_id, center, region, **attrs)
    except ParseError as exc:
        raise _at(exc, lineno) from None


def read_network(text: str, eps: float = EPS_GEO) -> NetworkFile:
    """Parse `node`, `edge` and `site` records into a validated network and its sites."""
    nodes: List[RoadNode] = []
    raw_edges = []
    sites: List[CandidateSite] = []
    positions: Dict[str, Point] = {}
    for lineno, tokens in _lines(text):
        kind = tokens[0]
        if kind == "node":
            if len(tokens) not in (4, 5) or (len(tokens) == 5 and tokens[4] != "artificial"):
                raise ParseError("node needs <id> <x> <y> [artificial]", lineno)
            p = Point(_num(tokens[2], lineno, tokens[1]), _num(tokens[3], lineno, tokens[1]))
            nodes.append(RoadNode(tokens[1], p, len(tokens) == 5))
            positions.setdefault(tokens[1], p)
        elif kind == "edge":
            raw_edges.append((lineno, *_parse_edge(tokens, lineno)))
        elif kind == "site":
            sites.append(_parse_site(tokens, lineno))
        else:
            raise ParseError(f"unknown record {kind!r}", lineno)

    edges = []
    for lineno, (edge_id, a, b, speed, density), declared in raw_edges:
        for end in (a, b):
            if end not in positions:
                raise UnknownIdError(f"edge {edge_id} references missing node {end}", lineno)
        length = declared if declared is not None else positions[a].distance_to(positions[b])
        try:
            edges.append(RoadEdge(edge_id, a, b, length, speed, density))
        except ParseError as exc:
            raise _at(exc, lineno) from None
    network = RoadNetwork(nodes, edges, eps)
    log.debug("loaded %r with %d sites", network, len(sites))
    return NetworkFile(network, sites)


def load_network(text: str) -> RoadNetwork:
    return read_network(text).network


def dump_network(network: RoadNetwork, sites: Sequence[CandidateSite] = ()) -> str:
    lines = []
    for node_id in sorted_ids(network.nodes):
        node = network.nodes[node_id]
        tail = " artificial" if node.artificial else ""
        lines.append(f"node {node_id} {_fmt(node.position.x)} {_fmt(node.position.y)}{tail}")
    for edge_id in sorted_ids(network.edges):
        e = network.edges[edge_id]
        lines.append(
            f"edge {edge_id} {e.u} {e.v} {_fmt(e.speed_interval[0])} {_fmt(e.speed_interval[1])} "
            f"{_fmt(e.density_interval[0])} {_fmt(e.density_interval[1])}"
        )
    for site in sorted(sites, key=lambda s: natural_key(s.id)):
        r = site.region
        head = f"site {site.id} {_fmt(site.position.x)} {_fmt(site.position.y)}"
        if isinstance(r, Disk):
            shape = f"disk {_fmt(r.radius)}"
        elif isinstance(r, FourSector):
            shape = "sectors " + " ".join(_fmt(x) for x in r.radii)
        else:
            shape = "poly " + " ".join(f"{_fmt(p.x)} {_fmt(p.y)}" for p in r.vertices)
        lines.append(
            f"{head} {shape} cost {_fmt(site.cost)} "
            f"cost2 {_fmt(site.first_stage_cost)} {_fmt(site.second_stage_cost)} "
            f"rate {_fmt(site.rate_interval[0])} {_fmt(site.rate_interval[1])}"
        )
    return "\n".join(lines) + "\n"


# ─── Paths ────────────────────────────────────────────────────────────────────

def load_paths(text: str, network: RoadNetwork) -> MovementSet:
    paths: List[MovementPath] = []
    demands: Dict[str, float] = {}
    for lineno, tokens in _lines(text):
        if tokens[0] != "path" or len(tokens) < 2:
            raise ParseError("expected `path <id> <node> <node> ... [lambda <x>]`", lineno)
        path_id = tokens[1]
        nodes = tokens[2:]
        if "lambda" in nodes:
            k = nodes.index("lambda")
            if k != len(nodes) - 2:
                raise ParseError(f"path {path_id}: lambda must come last with one value", lineno)
            demands[path_id] = _num(nodes[k + 1], lineno, f"path {path_id} lambda")
            nodes = nodes[:k]
        try:
            paths.append(MovementPath.from_nodes(network, path_id, nodes))
        except ParseError as exc:
            raise _at(exc, lineno) from None
    return MovementSet(paths, demands)


def dump_paths(movements: MovementSet) -> str:
    lines = []
    for p in movements:
        demand = movements.demands.get(p.id, 1.0)
        tail = f" lambda {_fmt(demand)}" if demand != 1.0 else ""
        lines.append(f"path {p.id} {' '.join(p.nodes)}{tail}")
    return "\n".join(lines) + "\n"


# ─── Deployments ──────────────────────────────────────────────────────────────

@dataclass
class DeploymentFile:
    sites: List[str] = field(default_factory=list)
    first_stage: List[str] = field(default_factory=list)
    second_stage: Dict[str, List[str]] = field(default_factory=dict)

    @property
    def all_sites(self) -> List[str]:
        return sorted_ids(set(self.sites) | set(self.first_stage))


def load_deployment(text: str) -> DeploymentFile:
    out = DeploymentFile()
    for lineno, tokens in _lines(text):
        if tokens[0] == "deploy" and len(tokens) == 2:
            out.sites.append(tokens[1])
        elif tokens[0] == "deploy" and len(tokens) == 3:
            out.second_stage.setdefault(tokens[1], []).append(tokens[2])
        elif tokens[0] == "deploy0" and len(tokens) == 2:
            out.first_stage.append(tokens[1])
        else:
            raise ParseError("expected `deploy <site>`, `deploy0 <site>` or `deploy <scenario> <site>`", lineno)
    return out


def dump_deployment(sites: Sequence[str] = (), first_stage: Sequence[str] = (),
                    second_stage: Optional[Dict[str, Sequence[str]]] = None) -> str:
    lines = [f"deploy {s}" for s in sorted_ids(sites)]
    lines += [f"deploy0 {s}" for s in sorted_ids(first_stage)]
    for label, chosen in (second_stage or {}).items():
        lines += [f"deploy {label} {s}" for s in sorted_ids(chosen)]
    return "\n".join(lines) + ("\n" if lines else "")


# ─── Scenarios ────────────────────────────────────────────────────────────────

def load_scenarios(text: str) -> List[Scenario]:
    """`scenario <label>` opens a block; records before any header form one unnamed scenario."""
    blocks: List[Tuple[str, Dict[str, Dict[str, float]]]] = []

    def current() -> Dict[str, Dict[str, float]]:
        if not blocks:
            blocks.append(("file", {"speed": {}, "density": {}, "rate": {}}))
        return blocks[-1][1]

    for lineno, tokens in _lines(text):
        if tokens[0] == "scenario" and len(tokens) == 2:
            blocks.append((tokens[1], {"speed": {}, "density": {}, "rate": {}}))
        elif tokens[0] in ("speed", "density", "rate") and len(tokens) == 3:
            value = _num(tokens[2], lineno, f"{tokens[0]} {tokens[1]}")
            if not value > 0:
                raise ParseError(f"{tokens[0]} {tokens[1]} must be positive", lineno)
            current()[tokens[0]][tokens[1]] = value
        else:
            raise ParseError("expected `speed|density|rate <id> <value>` or `scenario <label>`", lineno)
    return [Scenario(t["speed"], t["density"], t["rate"], label) for label, t in blocks]


def load_scenario(text: str) -> Scenario:
    scenarios = load_scenarios(text)
    if len(scenarios) != 1:
        raise ParseError(f"expected one scenario, found {len(scenarios)}")
    return scenarios[0]


def dump_scenario(scenario: Scenario, header: bool = False) -> str:
    lines = [f"scenario {scenario.label}"] if header else []
    lines += [f"speed {e} {_fmt(scenario.speeds[e])}" for e in sorted_ids(scenario.speeds)]
    lines += [f"density {e} {_fmt(scenario.densities[e])}" for e in sorted_ids(scenario.densities)]
    lines += [f"rate {a} {_fmt(scenario.rates[a])}" for a in sorted_ids(scenario.rates)]
    return "\n".join(lines) + "\n"


# ─── Mobility traces ──────────────────────────────────────────────────────────

def dump_trace(trace: MobilityTrace) -> str:
    lines = [f"duration {_fmt(trace.duration)}"]
    if trace.seed is not None:
        lines.append(f"seed {trace.seed}")
    for user in trace.users:
        for s in trace.segments[user]:
            lines.append(f"u {user} t {_fmt(s.t0)} edge {s.edge} off {_fmt(s.off0)} leg {s.leg}")
            lines.append(f"u {user} t {_fmt(s.t1)} edge {s.edge} off {_fmt(s.off1)} leg {s.leg}")
    return "\n".join(lines) + "\n"


def load_trace(text: str) -> MobilityTrace:
    """Rows come in start/end pairs, one pair per segment."""
    duration = None
    seed = None
    rows: Dict[int, List[Tuple[int, float, str, float, int]]] = {}
    for lineno, tokens in _lines(text):
        if tokens[0] == "duration" and len(tokens) == 2:
            duration = _num(tokens[1], lineno, "duration")
        elif tokens[0] == "seed" and len(tokens) == 2:
            seed = int(tokens[1])
        elif tokens[0] == "u" and len(tokens) in (8, 10) and tokens[2] == "t" and tokens[4] == "edge" and tokens[6] == "off":
            try:
                user = int(tokens[1])
            except ValueError:
                raise ParseError(f"user id must be an integer, got {tokens[1]!r}", lineno) from None
            leg = int(tokens[9]) if len(tokens) == 10 else 0
            rows.setdefault(user, []).append((lineno, _num(tokens[3], lineno, "t"), tokens[5],
                                              _num(tokens[7], lineno, "off"), leg))
        else:
            raise ParseError("expected `u <user> t <s> edge <id> off <m> [leg <k>]`", lineno)
    if duration is None:
        raise ParseError("trace needs a `duration <s>` line")
    segments: Dict[int, List[TraceSegment]] = {}
    for user, user_rows in rows.items():
        if len(user_rows) % 2:
            raise ParseError(f"user {user}: unpaired trace row", user_rows[-1][0])
        segs = []
        for (ln, t0, e0, o0, leg), (_, t1, e1, o1, _) in zip(user_rows[::2], user_rows[1::2]):
            if e0 != e1 or t1 < t0:
                raise ParseError(f"user {user}: malformed segment", ln)
            segs.append(TraceSegment(user, t0, t1, e0, o0, o1, leg))
        segments[user] = segs
    return MobilityTrace(segments, duration, seed)


def read_text(path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from exc
