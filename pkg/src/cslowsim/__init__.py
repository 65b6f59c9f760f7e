"""Cycle-accurate microcoded accumulator core, C-slow barrel execution, and
synchronous-netlist pipelining/retiming tools."""

__version__ = "0.1.0"
