"""C-slow barrel execution: C replicated cores sharing one datapath.

A hardware thread counter selects the active register group each fast-clock
tick, strictly round-robin (thread = tick mod C, no skipping).  Memory comes
in three sharing classes:

  private  each thread owns a full 256-word image
  shared   one 256-word image visible to every thread
  tagged   one physical store of C*256 words; thread t's access to `addr`
           lands in cell t*256 + addr (address-space partitioning by
           thread id)

Halted threads stay in the schedule and burn their slots on the halt
self-loop; those slots are the vertical waste reported in RunMetrics.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .isa import MEMORY_SIZE, MemoryImage
from .microcode import (
    HALT_SEQ,
    CoreState,
    CycleLimitExceeded,
    _STEP_TABLE,
    run,
)

MAX_THREADS = 8
DEFAULT_MAX_FAST_CYCLES = 1_000_000


class BadThreadCount(Exception):
    pass


class ImageMismatch(Exception):
    pass


class MemoryMode(Enum):
    PRIVATE = "private"
    SHARED = "shared"
    TAGGED = "tagged"


@dataclass
class CslowConfig:
    c: int
    mode: MemoryMode = MemoryMode.PRIVATE
    max_fast_cycles: int = DEFAULT_MAX_FAST_CYCLES


@dataclass
class RunMetrics:
    per_thread_cycles: list
    rounds: int
    fast_cycles_total: int
    occupancy: Fraction
    vertical_waste: Fraction


class TaggedMemory:
    """One physical store of C*256 bytes, partitioned by thread id."""

    def __init__(self, c):
        self.c = c
        self.store = bytearray(c * MEMORY_SIZE)

    def install(self, thread, image):
        base = thread * MEMORY_SIZE
        self.store[base:base + MEMORY_SIZE] = image.cells

    def view(self, thread):
        base = thread * MEMORY_SIZE
        return memoryview(self.store)[base:base + MEMORY_SIZE]

    def image(self, thread) -> MemoryImage:
        base = thread * MEMORY_SIZE
        return MemoryImage(self.store[base:base + MEMORY_SIZE])


class CslowMachine:
    """C replicated CoreStates advanced round-robin over a shared datapath."""

    def __init__(self, config: CslowConfig, images):
        c = config.c
        if not 1 <= c <= MAX_THREADS:
            raise BadThreadCount("thread count %r outside [1, %d]" % (c, MAX_THREADS))
        images = list(images)

        if config.mode is MemoryMode.SHARED:
            if len(images) == c:
                first = images[0]
                for i, img in enumerate(images[1:], start=1):
                    if img.cells != first.cells:
                        raise ImageMismatch(
                            "shared memory needs one image; image %d differs from image 0" % i)
                images = [first]
            if len(images) != 1:
                raise BadThreadCount(
                    "shared mode takes 1 image or %d identical, got %d" % (c, len(images)))
            shared = images[0].copy()
            self._memories = [shared]
            self._views = [shared.cells] * c
            self._initial = [shared.copy() for _ in range(c)]
        else:
            if len(images) != c:
                raise BadThreadCount("expected %d images, got %d" % (c, len(images)))
            if config.mode is MemoryMode.PRIVATE:
                copies = [img.copy() for img in images]
                self._memories = copies
                self._views = [m.cells for m in copies]
            else:  # tagged
                tagged = TaggedMemory(c)
                for t, img in enumerate(images):
                    tagged.install(t, img)
                self._memories = [tagged]
                self._views = [tagged.view(t) for t in range(c)]
            self._initial = [img.copy() for img in images]

        self.config = config
        self.c = c
        self.contexts = [CoreState() for _ in range(c)]
        self.fast_cycles = 0
        self.halt_cycle = [None] * c
        self.traces = None

    @property
    def thread_counter(self):
        return self.fast_cycles % self.c

    @property
    def all_halted(self):
        return all(h is not None for h in self.halt_cycle)

    def enable_tracing(self):
        self.traces = [[] for _ in range(self.c)]

    def thread_memory(self, thread) -> MemoryImage:
        """Snapshot of the memory as thread `thread` sees it."""
        if self.config.mode is MemoryMode.SHARED:
            return self._memories[0].copy()
        if self.config.mode is MemoryMode.PRIVATE:
            return self._memories[thread].copy()
        return self._memories[0].image(thread)

    def initial_image(self, thread) -> MemoryImage:
        return self._initial[thread if len(self._initial) > 1 else 0]

    def tick(self):
        """Advance one fast-clock cycle: exactly one micro-step of the
        scheduled thread (the halt row when it has already halted)."""
        t = self.fast_cycles % self.c
        ctx = self.contexts[t]
        if self.traces is not None:
            self.traces[t].append(ctx.snapshot())
        _STEP_TABLE[ctx.micro_pc](ctx, self._views[t])
        if ctx.micro_pc == HALT_SEQ and self.halt_cycle[t] is None:
            self.halt_cycle[t] = ctx.cycles
        self.fast_cycles += 1

    def run_all(self, trace: bool = False) -> RunMetrics:
        """Tick until every thread has halted; stops at the tick that halts
        the last one."""
        if trace and self.traces is None:
            self.enable_tracing()
        limit = self.config.max_fast_cycles
        halt_cycle = self.halt_cycle
        pending = halt_cycle.count(None)
        while pending:
            if self.fast_cycles >= limit:
                stuck = [i for i, h in enumerate(halt_cycle) if h is None]
                raise CycleLimitExceeded(
                    "threads %s not halted within %d fast cycles" % (stuck, limit),
                    threads=stuck)
            before = halt_cycle.count(None)
            self.tick()
            pending -= before - halt_cycle.count(None)
        return self.metrics()

    def metrics(self) -> RunMetrics:
        per_thread = list(self.halt_cycle)
        if any(h is None for h in per_thread):
            raise ValueError("metrics requested before all threads halted")
        rounds = max(per_thread)
        total = self.fast_cycles
        busy = sum(per_thread)
        return RunMetrics(
            per_thread_cycles=per_thread,
            rounds=rounds,
            fast_cycles_total=total,
            occupancy=Fraction(busy, total),
            vertical_waste=Fraction(total - busy, total),
        )


def new_machine(config: CslowConfig, images) -> CslowMachine:
    return CslowMachine(config, images)


def sequential_baseline(images, max_cycles: int = DEFAULT_MAX_FAST_CYCLES) -> int:
    """Total cycles to run the images one after another on the plain core."""
    return sum(run(img, max_cycles).cycles for img in images)


@dataclass
class CompareResult:
    sum: int
    max_rounds: int
    fast_cycles: int
    speedup: Fraction


def compare(images, c: int, mode: MemoryMode = MemoryMode.PRIVATE,
            max_cycles: int = DEFAULT_MAX_FAST_CYCLES) -> CompareResult:
    """Sequential-sum vs interleaved-rounds comparison for one thread count."""
    machine = CslowMachine(CslowConfig(c, mode, max_cycles), images)
    metrics = machine.run_all()
    seq = sequential_baseline(images, max_cycles)
    return CompareResult(
        sum=seq,
        max_rounds=metrics.rounds,
        fast_cycles=metrics.fast_cycles_total,
        speedup=Fraction(seq, metrics.rounds),
    )


def machine_report(machine: CslowMachine, sequential_sum: int) -> dict:
    """The run-report document (shared by `run` and `run-cslow`)."""
    metrics = machine.metrics()
    threads = []
    for t in range(machine.c):
        initial = machine.initial_image(t)
        final = machine.thread_memory(t)
        diff = {
            "0x%02x" % addr: [initial.cells[addr], final.cells[addr]]
            for addr in range(MEMORY_SIZE)
            if initial.cells[addr] != final.cells[addr]
        }
        ctx = machine.contexts[t]
        threads.append({
            "halted": ctx.halted,
            "cycles": metrics.per_thread_cycles[t],
            "registers": ctx.registers(),
            "memory_diff": diff,
        })
    return {
        "c": machine.c,
        "mode": machine.config.mode.value,
        "cycles": metrics.rounds,
        "per_thread_cycles": metrics.per_thread_cycles,
        "rounds": metrics.rounds,
        "fast_cycles_total": metrics.fast_cycles_total,
        "occupancy": float(metrics.occupancy),
        "vertical_waste": float(metrics.vertical_waste),
        "sequential_sum": sequential_sum,
        "speedup": float(Fraction(sequential_sum, metrics.rounds)),
        "threads": threads,
    }


BUNDLE_MAGIC = "cslow-bundle"


def write_bundle(path, images, mode: MemoryMode) -> None:
    """Multi-image bundle: header line, then one memory image per thread."""
    with open(path, "w") as fh:
        fh.write("%s C=%d mode=%s\n" % (BUNDLE_MAGIC, len(images), mode.value))
        for img in images:
            fh.write(img.to_text())


def read_bundle(path):
    """Returns (c, mode, images)."""
    with open(path) as fh:
        header = fh.readline().strip()
        body = fh.read()
    fields = header.split()
    if len(fields) != 3 or fields[0] != BUNDLE_MAGIC:
        raise ValueError("not a cslow-bundle file: %r" % header)
    try:
        c = int(fields[1].removeprefix("C="))
        mode = MemoryMode(fields[2].removeprefix("mode="))
    except ValueError:
        raise ValueError("bad bundle header: %r" % header) from None
    tokens = body.split()
    if len(tokens) != c * MEMORY_SIZE:
        raise ValueError("bundle body holds %d bytes, expected %d"
                         % (len(tokens), c * MEMORY_SIZE))
    images = []
    for t in range(c):
        chunk = " ".join(tokens[t * MEMORY_SIZE:(t + 1) * MEMORY_SIZE])
        images.append(MemoryImage.from_text(chunk))
    return c, mode, images
