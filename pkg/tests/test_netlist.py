import random

import pytest

import gennet
from cslowsim.netlist import (
    Edge,
    Netlist,
    NetlistError,
    Node,
    NodeKind,
    critical_path,
    parse,
    simulate,
    to_text,
)


def test_parse_chain_fixture(chain_net_text):
    net = parse(chain_net_text)
    assert len(net.nodes) == 6
    assert net.inputs() == ["in"]
    assert net.outputs() == ["out"]
    assert all(e.weight == 0 for e in net.edges)
    assert net.total_registers == 0


def test_parse_empty_is_valid():
    net = parse("")
    assert len(net.nodes) == 0
    assert critical_path(net).period == 0


def test_parse_collects_violations():
    # Syntax problems are reported together, with line numbers.
    with pytest.raises(NetlistError) as exc:
        parse("input a\nbogus line\ngate g1 AND\nwire a g1 0 0\n")
    text_all = "\n".join(exc.value.violations)
    assert "line 2" in text_all and "line 3" in text_all
    # Structural problems are also collected, not reported one at a time.
    with pytest.raises(NetlistError) as exc:
        parse("input a\ngate g1 AND 1\nwire a g1 0 0\nwire a nosuch 0 0\n")
    assert any("unknown node 'nosuch'" in v for v in exc.value.violations)
    with pytest.raises(NetlistError, match="pin 1 of 'g1' is undriven"):
        parse("input a\ngate g1 AND 1\nwire a g1 0 0\n")


def test_parse_rejects_combinational_cycle():
    text = ("gate g1 BUF 1\n"
            "gate g2 BUF 1\n"
            "wire g1 g2 0 0\n"
            "wire g2 g1 0 0\n")
    with pytest.raises(NetlistError, match="combinational cycle"):
        parse(text)
    # one register on the loop makes it legal
    ok = parse(text.replace("wire g2 g1 0 0", "wire g2 g1 0 1"))
    assert ok.total_registers == 1


def test_parse_arity_checks():
    with pytest.raises(NetlistError, match="no pin 1"):
        parse("input a\ninput b\ngate g NOT 1\nwire a g 0 0\nwire b g 1 0\n")
    with pytest.raises(NetlistError, match="driven twice"):
        parse("input a\ngate g NOT 1\nwire a g 0 0\nwire a g 0 0\n")
    with pytest.raises(NetlistError, match="undriven"):
        parse("output o\n")


def test_critical_path_examples(chain_net_text):
    chain = parse(chain_net_text)
    cp = critical_path(chain)
    assert cp.period == 4
    # witness is one maximising register-free path
    assert sum(chain.nodes[n].delay for n in cp.path) == 4
    assert cp.path == ["g1", "g2", "g3", "g4"]

    # one register mid-chain halves the combinational span
    halved = chain.with_weights(
        [1 if (e.src, e.dst) == ("g2", "g3") else 0 for e in chain.edges])
    assert critical_path(halved).period == 2

    single = parse("gate k CONST0 0\noutput o\nwire k o 0 0\n")
    assert critical_path(single).period == 0


def test_critical_path_ring_fixture(ring_net_text):
    ring = parse(ring_net_text)
    cp = critical_path(ring)
    assert cp.period == 4
    # the maximising path crosses the feedback wire g4 -> g1
    assert sum(ring.nodes[n].delay for n in cp.path) == 4
    assert ("g4", "g1") in list(zip(cp.path, cp.path[1:]))


def test_simulate_buf_chain_identity(chain_net_text):
    net = parse(chain_net_text)
    rng = random.Random(0)
    stream = [rng.randint(0, 1) for _ in range(20)]
    outs = simulate(net, {"in": stream}, 20)
    assert outs["out"] == stream


def test_simulate_single_register_delays_one_cycle():
    net = parse("input a\ngate b BUF 0\noutput o\nwire a b 0 1\nwire b o 0 0\n")
    stream = [1, 0, 1, 1, 0, 0, 1]
    outs = simulate(net, {"a": stream}, 7)
    assert outs["o"] == [0] + stream[:-1]


def test_simulate_toggle_ring(toggle_net_text):
    net = parse(toggle_net_text)
    outs = simulate(net, {"in": [1] * 6}, 6)
    assert outs["out"] == [0, 1, 0, 1, 0, 1]
    outs = simulate(net, {"in": [1, 0, 0, 1, 0, 0]}, 6)
    assert outs["out"] == [0, 1, 1, 1, 0, 0]


def test_simulate_gate_truth_tables():
    lines = ["input a", "input b"]
    for kind in ("AND", "OR", "XOR", "NAND", "NOR"):
        lines += ["gate %s %s 1" % (kind.lower(), kind),
                  "wire a %s 0 0" % kind.lower(),
                  "wire b %s 1 0" % kind.lower(),
                  "output o_%s" % kind.lower(),
                  "wire %s o_%s 0 0" % (kind.lower(), kind.lower())]
    lines += ["gate inv NOT 1", "wire a inv 0 0", "output o_not",
              "wire inv o_not 0 0",
              "gate one CONST1 0", "output o_one", "wire one o_one 0 0",
              "gate zero CONST0 0", "output o_zero", "wire zero o_zero 0 0"]
    net = parse("\n".join(lines))
    a = [0, 0, 1, 1]
    b = [0, 1, 0, 1]
    outs = simulate(net, {"a": a, "b": b}, 4)
    assert outs["o_and"] == [0, 0, 0, 1]
    assert outs["o_or"] == [0, 1, 1, 1]
    assert outs["o_xor"] == [0, 1, 1, 0]
    assert outs["o_nand"] == [1, 1, 1, 0]
    assert outs["o_nor"] == [1, 0, 0, 0]
    assert outs["o_not"] == [1, 1, 0, 0]
    assert outs["o_one"] == [1, 1, 1, 1]
    assert outs["o_zero"] == [0, 0, 0, 0]


def test_simulate_missing_or_short_input():
    net = parse("input a\noutput o\ngate g BUF 1\nwire a g 0 0\nwire g o 0 0\n")
    with pytest.raises(ValueError, match="missing input"):
        simulate(net, {}, 4)
    with pytest.raises(ValueError, match="shorter"):
        simulate(net, {"a": [1, 0]}, 4)


def test_weight_k_edge_equals_k_chained_unit_stages():
    rng = random.Random(2)
    deep = parse("input a\noutput o\ngate g BUF 1\nwire a g 0 0\nwire g o 0 3\n")
    chained = parse(
        "input a\noutput o\n"
        "gate g BUF 1\ngate s1 BUF 0\ngate s2 BUF 0\n"
        "wire a g 0 0\nwire g s1 0 1\nwire s1 s2 0 1\nwire s2 o 0 1\n")
    stream = [rng.randint(0, 1) for _ in range(30)]
    a = simulate(deep, {"a": stream}, 30)
    b = simulate(chained, {"a": stream}, 30)
    assert a["o"] == b["o"]


def test_simulate_lanes_match_lane_by_lane_runs():
    rng = random.Random(9)
    net = gennet.random_netlist(rng, max_gates=6)
    cycles, lanes = 24, 8
    packed = {name: [rng.getrandbits(lanes) for _ in range(cycles)]
              for name in net.inputs()}
    wide = simulate(net, packed, cycles, lanes=lanes)
    for lane in range(lanes):
        single = {name: [(v >> lane) & 1 for v in packed[name]]
                  for name in net.inputs()}
        narrow = simulate(net, single, cycles)
        for out in net.outputs():
            assert [(v >> lane) & 1 for v in wide[out]] == narrow[out]


def test_to_text_roundtrip(ring_net_text):
    ring = parse(ring_net_text)
    again = parse(to_text(ring))
    assert again == ring


def test_random_netlists_validate_and_simulate():
    rng = random.Random(11)
    for _ in range(30):
        net = gennet.random_netlist(rng, max_gates=8)
        streams = {name: [rng.randint(0, 1) for _ in range(16)]
                   for name in net.inputs()}
        outs = simulate(net, streams, 16)
        assert all(len(v) == 16 for v in outs.values())
        again = simulate(net, streams, 16)
        assert outs == again


def test_netlist_constructor_validates():
    with pytest.raises(NetlistError):
        Netlist([Node("o", NodeKind.OUTPUT)], [])
    with pytest.raises(NetlistError):
        Netlist([Node("g", NodeKind.BUF, 1)], [Edge("g", "g", 0, 0)])
