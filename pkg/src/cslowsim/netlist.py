"""Synchronous gate-level netlists: parsing, validation, critical path,
bit-true simulation.

Registers live on edges as integer weights (an edge of weight k is a k-deep
register pipeline, every register initialised to 0).  Gate delays are
non-negative integers; the clock period of a netlist is the largest total
delay along any register-free path.  Every directed cycle must carry at
least one register.

File format (line-based, `#` comments):
    input <name>
    output <name>
    gate <name> <kind> <delay>
    wire <from> <to> <pin> <weight>

Streams files hold one line per cycle, one 0/1 character per signal in
declaration order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class NetlistError(Exception):
    """Structural or syntax violations; collects all of them."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NodeKind(Enum):
    INPUT = "input"
    OUTPUT = "output"
    AND = "AND"
    OR = "OR"
    NOT = "NOT"
    XOR = "XOR"
    NAND = "NAND"
    NOR = "NOR"
    BUF = "BUF"
    CONST0 = "CONST0"
    CONST1 = "CONST1"


GATE_KINDS = frozenset(k for k in NodeKind
                       if k not in (NodeKind.INPUT, NodeKind.OUTPUT))

ARITY = {
    NodeKind.INPUT: 0,
    NodeKind.OUTPUT: 1,
    NodeKind.AND: 2,
    NodeKind.OR: 2,
    NodeKind.XOR: 2,
    NodeKind.NAND: 2,
    NodeKind.NOR: 2,
    NodeKind.NOT: 1,
    NodeKind.BUF: 1,
    NodeKind.CONST0: 0,
    NodeKind.CONST1: 0,
}


@dataclass(frozen=True)
class Node:
    name: str
    kind: NodeKind
    delay: int = 0


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    pin: int
    weight: int


class Netlist:
    """Immutable-by-convention gate graph; construction validates."""

    def __init__(self, nodes, edges):
        self.nodes = {n.name: n for n in nodes}
        self.edges = tuple(edges)
        violations = validate(self.nodes, self.edges)
        if violations:
            raise NetlistError(violations)

    def inputs(self):
        return [n.name for n in self.nodes.values() if n.kind is NodeKind.INPUT]

    def outputs(self):
        return [n.name for n in self.nodes.values() if n.kind is NodeKind.OUTPUT]

    def gates(self):
        return [n.name for n in self.nodes.values() if n.kind in GATE_KINDS]

    @property
    def total_registers(self):
        return sum(e.weight for e in self.edges)

    def with_weights(self, weights) -> "Netlist":
        """Same structure with edge weights replaced (one per edge, in order)."""
        new_edges = [Edge(e.src, e.dst, e.pin, w)
                     for e, w in zip(self.edges, weights, strict=True)]
        return Netlist(self.nodes.values(), new_edges)

    def __eq__(self, other):
        return (isinstance(other, Netlist)
                and self.nodes == other.nodes and self.edges == other.edges)

    def __repr__(self):
        return "Netlist(%d nodes, %d edges, %d registers)" % (
            len(self.nodes), len(self.edges), self.total_registers)


def validate(nodes, edges) -> list:
    """All structural violations, empty when the netlist is well formed."""
    violations = []
    for e in edges:
        for end in (e.src, e.dst):
            if end not in nodes:
                violations.append("wire references unknown node '%s'" % end)
        if e.weight < 0:
            violations.append("wire %s->%s has negative weight" % (e.src, e.dst))
    if violations:
        return violations

    drivers = {}
    for e in edges:
        dst = nodes[e.dst]
        arity = ARITY[dst.kind]
        if not 0 <= e.pin < max(arity, 1) or arity == 0:
            violations.append("node '%s' (%s) has no pin %d for wire from '%s'"
                              % (e.dst, dst.kind.value, e.pin, e.src))
            continue
        key = (e.dst, e.pin)
        if key in drivers:
            violations.append("pin %d of '%s' driven twice" % (e.pin, e.dst))
        drivers[key] = e

    for n in nodes.values():
        if n.delay < 0:
            violations.append("node '%s' has negative delay" % n.name)
        if n.kind in (NodeKind.INPUT, NodeKind.OUTPUT) and n.delay != 0:
            violations.append("io node '%s' must have delay 0" % n.name)
        for pin in range(ARITY[n.kind]):
            if (n.name, pin) not in drivers:
                violations.append("pin %d of '%s' is undriven" % (pin, n.name))

    cycle = _zero_weight_cycle(nodes, edges)
    if cycle:
        violations.append("combinational cycle: %s" % " -> ".join(cycle))
    return violations


def _zero_weight_cycle(nodes, edges):
    """One register-free directed cycle, or None."""
    adj = {name: [] for name in nodes}
    for e in edges:
        if e.weight == 0:
            adj[e.src].append(e.dst)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {name: WHITE for name in nodes}
    parent = {}
    for root in nodes:
        if color[root] != WHITE:
            continue
        stack = [(root, iter(adj[root]))]
        color[root] = GRAY
        while stack:
            name, it = stack[-1]
            advanced = False
            for succ in it:
                if color[succ] == WHITE:
                    color[succ] = GRAY
                    parent[succ] = name
                    stack.append((succ, iter(adj[succ])))
                    advanced = True
                    break
                if color[succ] == GRAY:
                    cycle = [succ, name]
                    node = name
                    while node != succ:
                        node = parent[node]
                        cycle.append(node)
                    cycle.reverse()
                    return cycle
            if not advanced:
                color[name] = BLACK
                stack.pop()
    return None


def parse(text: str) -> Netlist:
    """Parse the netlist file format; raises NetlistError listing every
    syntax and structural violation found."""
    nodes = []
    edges = []
    errors = []
    seen = set()

    def add_node(name, kind, delay, lineno):
        if name in seen:
            errors.append("line %d: duplicate node '%s'" % (lineno, name))
        else:
            seen.add(name)
            nodes.append(Node(name, kind, delay))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        word = fields[0]
        try:
            if word == "input" and len(fields) == 2:
                add_node(fields[1], NodeKind.INPUT, 0, lineno)
            elif word == "output" and len(fields) == 2:
                add_node(fields[1], NodeKind.OUTPUT, 0, lineno)
            elif word == "gate" and len(fields) == 4:
                kind = NodeKind(fields[2])
                if kind not in GATE_KINDS:
                    raise ValueError(fields[2])
                add_node(fields[1], kind, int(fields[3]), lineno)
            elif word == "wire" and len(fields) == 5:
                edges.append(Edge(fields[1], fields[2], int(fields[3]), int(fields[4])))
            else:
                errors.append("line %d: cannot parse %r" % (lineno, raw.strip()))
        except ValueError:
            errors.append("line %d: cannot parse %r" % (lineno, raw.strip()))

    if errors:
        raise NetlistError(errors)
    return Netlist(nodes, edges)


def to_text(netlist: Netlist) -> str:
    lines = []
    for n in netlist.nodes.values():
        if n.kind is NodeKind.INPUT:
            lines.append("input %s" % n.name)
        elif n.kind is NodeKind.OUTPUT:
            lines.append("output %s" % n.name)
        else:
            lines.append("gate %s %s %d" % (n.name, n.kind.value, n.delay))
    for e in netlist.edges:
        lines.append("wire %s %s %d %d" % (e.src, e.dst, e.pin, e.weight))
    return "\n".join(lines) + "\n"


def _zero_weight_topo(netlist):
    """Node names topologically ordered over register-free edges."""
    indeg = {name: 0 for name in netlist.nodes}
    adj = {name: [] for name in netlist.nodes}
    for e in netlist.edges:
        if e.weight == 0:
            indeg[e.dst] += 1
            adj[e.src].append(e.dst)
    ready = [name for name, d in indeg.items() if d == 0]
    order = []
    while ready:
        name = ready.pop()
        order.append(name)
        for succ in adj[name]:
            indeg[succ] -= 1
            if indeg[succ] == 0:
                ready.append(succ)
    if len(order) != len(netlist.nodes):
        raise NetlistError(["combinational cycle survived validation"])
    return order


@dataclass
class CriticalPath:
    period: int
    path: list  # node names along one maximising register-free path


def critical_path(netlist: Netlist) -> CriticalPath:
    """Longest total delay along any register-free path (the clock period)."""
    order = _zero_weight_topo(netlist)
    arrival = {}
    pred = {}
    fanin = {name: [] for name in netlist.nodes}
    for e in netlist.edges:
        if e.weight == 0:
            fanin[e.dst].append(e.src)
    best_name = None
    for name in order:
        node = netlist.nodes[name]
        incoming = 0
        via = None
        for src in fanin[name]:
            if arrival[src] > incoming:
                incoming = arrival[src]
                via = src
        arrival[name] = node.delay + incoming
        pred[name] = via
        if best_name is None or arrival[name] > arrival[best_name]:
            best_name = name
    if best_name is None or arrival[best_name] == 0:
        return CriticalPath(0, [])
    path = []
    node = best_name
    while node is not None:
        path.append(node)
        node = pred[node]
    path.reverse()
    return CriticalPath(arrival[best_name], path)


def format_streams(streams: dict, names) -> str:
    """Streams file: one line per cycle, one 0/1 character per signal, in
    the given declaration order."""
    length = {len(streams[name]) for name in names}
    if len(length) > 1:
        raise ValueError("streams differ in length: %s" % sorted(length))
    cycles = length.pop() if length else 0
    return "".join(
        "".join("1" if streams[name][t] else "0" for name in names) + "\n"
        for t in range(cycles))


def parse_streams(text: str, names) -> dict:
    streams = {name: [] for name in names}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if len(line) != len(names) or set(line) - {"0", "1"}:
            raise ValueError("line %d: expected %d characters of 0/1"
                             % (lineno, len(names)))
        for name, ch in zip(names, line):
            streams[name].append(int(ch))
    return streams


class _Plan:
    """Flattened evaluation plan for the simulator."""

    def __init__(self, netlist):
        order = _zero_weight_topo(netlist)
        self.index = {name: i for i, name in enumerate(order)}
        self.names = order

        fanin = {}  # (dst, pin) -> ('v', node index) | ('r', register index)
        self.registers = []  # (src index, depth) per weighted edge
        for e in netlist.edges:
            if e.weight == 0:
                fanin[(e.dst, e.pin)] = ("v", self.index[e.src])
            else:
                fanin[(e.dst, e.pin)] = ("r", len(self.registers))
                self.registers.append((self.index[e.src], e.weight))

        self.ops = []  # per node in order: (kind, src specs)
        self.input_slots = []   # (stream position, node index)
        self.output_slots = []  # (node index, source spec)
        inputs = netlist.inputs()
        for name in order:
            node = netlist.nodes[name]
            pins = tuple(fanin[(name, p)] for p in range(ARITY[node.kind]))
            self.ops.append((node.kind, pins))
            if node.kind is NodeKind.INPUT:
                self.input_slots.append((inputs.index(name), self.index[name]))
        self.inputs = inputs
        self.outputs = netlist.outputs()


def simulate(netlist: Netlist, inputs: dict, cycles: int, lanes: int = 1) -> dict:
    """Clocked simulation for `cycles` cycles; returns output streams.

    `inputs` maps every input name to a sequence of at least `cycles`
    values.  With lanes=1 values are bits; larger `lanes` runs that many
    independent bit-parallel simulations at once (each value is an integer
    whose bit k belongs to lane k), which all gate functions respect.
    Registers start at 0; outputs are sampled after combinational settling
    each cycle, then every register pipeline shifts.
    """
    missing = [name for name in netlist.inputs() if name not in inputs]
    if missing:
        raise ValueError("missing input streams: %s" % ", ".join(missing))
    for name in netlist.inputs():
        if len(inputs[name]) < cycles:
            raise ValueError("input stream '%s' shorter than %d cycles" % (name, cycles))

    plan = _Plan(netlist)
    mask = (1 << lanes) - 1
    n_nodes = len(plan.names)

    regs = [[0] * depth for _, depth in plan.registers]
    pos = [0] * len(plan.registers)
    in_streams = [inputs[name] for name in plan.inputs]
    outs = {name: [] for name in plan.outputs}
    out_specs = []
    for i, (kind, pins) in enumerate(plan.ops):
        if kind is NodeKind.OUTPUT:
            out_specs.append((plan.names[i], i))

    K = NodeKind
    ops = plan.ops
    input_slots = plan.input_slots
    for t in range(cycles):
        vals = [0] * n_nodes
        for spos, idx in input_slots:
            vals[idx] = in_streams[spos][t] & mask
        for i in range(n_nodes):
            kind, pins = ops[i]
            if pins:
                tag, ref = pins[0]
                x = vals[ref] if tag == "v" else regs[ref][pos[ref]]
                if len(pins) == 2:
                    tag, ref = pins[1]
                    y = vals[ref] if tag == "v" else regs[ref][pos[ref]]
            if kind is K.INPUT:
                continue  # value already loaded from its stream
            elif kind is K.OUTPUT or kind is K.BUF:
                vals[i] = x
            elif kind is K.AND:
                vals[i] = x & y
            elif kind is K.OR:
                vals[i] = x | y
            elif kind is K.XOR:
                vals[i] = x ^ y
            elif kind is K.NAND:
                vals[i] = mask & ~(x & y)
            elif kind is K.NOR:
                vals[i] = mask & ~(x | y)
            elif kind is K.NOT:
                vals[i] = mask & ~x
            elif kind is K.CONST0:
                vals[i] = 0
            else:  # CONST1
                vals[i] = mask

        for name, i in out_specs:
            outs[name].append(vals[i])
        for r, (src, depth) in enumerate(plan.registers):
            buf = regs[r]
            p = pos[r]
            buf[p] = vals[src]
            pos[r] = (p + 1) % depth
    return outs
