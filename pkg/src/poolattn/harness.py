"""Verification and benchmark harness: config files, synthetic data, runners.

The PRNG is SplitMix64 driving a 53-bit uniform mapper, fixed exactly so that
golden fixtures are portable.  Config files are flat ``key = value`` text with
``#`` comments.  Every runner is deterministic given (config text, seed);
benchmark wall times are the only nondeterministic outputs.
"""

from __future__ import annotations

import csv
import hashlib
import statistics
import time
from contextlib import nullcontext
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from poolattn.attention import (
    first_level_forward,
    layer_backward,
    layer_forward,
    second_level_forward,
)
from poolattn.core import (
    POOLING_KINDS,
    LayerConfig,
    LayerParams,
    ProjectionTriple,
    SequenceBatch,
    project_qkv,
)
from poolattn.costmodel import (
    cost_dense,
    cost_single_window,
    cost_two_level,
    estimate_peak_bytes,
)
from poolattn.oracle import (
    dense_attention,
    dense_first_level,
    dense_layer_reference,
    literal_pooling_attention,
)

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover - optional, for timing stability only
    threadpool_limits = None

SCHEMA_VERSION = 1

ORACLE_DIFF_THRESHOLD = 1e-10
GRADCHECK_THRESHOLD = 1e-6
GRADCHECK_STEP = 1e-5
ORACLE_DIFF_MAX_N = 512
GRADCHECK_MAX_N = 64
DEFAULT_DENSE_CAP = 2048
DEFAULT_MEM_GUARD = 2 << 30

_MASK64 = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)


# ---------------------------------------------------------------------------
# seeded randomness


def splitmix64(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """`count` outputs of the SplitMix64 sequence for `seed`, starting at `offset`.

    Output i is mix64(seed + (i+1) * 0x9E3779B97F4A7C15) with the standard
    30/27/31 xor-shift-multiply finalizer, all arithmetic mod 2^64.
    """
    if count < 0 or offset < 0:
        raise ValueError("count and offset must be non-negative")
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK64) + idx * _GAMMA
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def unit_uniform(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Uniform float64 in [0, 1): the top 53 bits of each SplitMix64 output."""
    return (splitmix64(seed, count, offset) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def symmetric_uniform(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Uniform float64 in [-1, 1)."""
    return 2.0 * unit_uniform(seed, count, offset) - 1.0


def synth_batch(n: int, d: int, seed: int, global_count: int = 0) -> SequenceBatch:
    """Seeded synthetic batch: uniform [-1, 1) embeddings, globals at 0..g-1."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if not 0 <= global_count <= n:
        raise ValueError(f"global_count must be in [0, {n}]")
    emb = symmetric_uniform(seed, n * d).reshape(n, d)
    return SequenceBatch.of(emb, global_set=range(global_count))


def init_params(config: LayerConfig, seed: int) -> LayerParams:
    """Seeded parameters, every entry uniform in [-1/sqrt(d), 1/sqrt(d)).

    One SplitMix64 stream is consumed in a fixed field order (first triple,
    then the second triple unless shared, then the two pooling weight
    matrices), so identical (config, seed) pairs always yield identical
    parameters.
    """
    d = config.d_model
    scale = 1.0 / np.sqrt(d)
    offset = 0

    def draw(*shape):
        nonlocal offset
        count = int(np.prod(shape))
        block = scale * symmetric_uniform(seed, count, offset).reshape(shape)
        offset += count
        return block

    def draw_triple():
        return ProjectionTriple(
            draw(d, d), draw(d),
            draw(d, d), draw(d),
            draw(d, d), draw(d),
        )

    first = draw_triple()
    second = first if config.share_projections else draw_triple()
    wpk = wpv = None
    if config.needs_pool_weights:
        wpk = draw(config.kappa, d)
        wpv = draw(config.kappa, d)
    return LayerParams(first, second, wpk, wpv).validate(config)


def batch_checksum(arr: np.ndarray) -> str:
    """Portable sha256 hex digest of a float64 array (little-endian bytes)."""
    data = np.ascontiguousarray(arr, dtype="<f8")
    return hashlib.sha256(data.tobytes()).hexdigest()


# ---------------------------------------------------------------------------
# config files


CONFIG_KEYS = (
    "d_model", "n_heads", "w1", "w2", "kappa", "xi",
    "pooling", "mix", "share_projections", "n_list", "seed", "trials",
)

_INT_KEYS = {"d_model", "n_heads", "w1", "w2", "kappa", "xi", "seed", "trials"}
_BOOL_KEYS = {"mix", "share_projections"}


@dataclass(frozen=True)
class RunConfig:
    """One harness run: the layer settings plus sweep/seed/trial controls.

    ``command`` and ``out`` are filled in by the CLI, not by the config file.
    """

    layer: LayerConfig = LayerConfig()
    n_list: tuple[int, ...] = (4096, 8192, 16384)
    seed: int = 1
    trials: int = 7
    command: str | None = None
    out: str | None = None


def _parse_value(key: str, raw: str, lineno: int):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _BOOL_KEYS:
            lowered = raw.lower()
            if lowered in ("true", "false"):
                return lowered == "true"
            raise ValueError("expected true or false")
        if key == "pooling":
            if raw not in POOLING_KINDS:
                raise ValueError(f"expected one of {', '.join(POOLING_KINDS)}")
            return raw
        if key == "n_list":
            values = tuple(int(part.strip()) for part in raw.split(",") if part.strip())
            if not values or any(v < 1 for v in values):
                raise ValueError("expected a comma-separated list of positive ints")
            return values
    except ValueError as err:
        raise ValueError(f"line {lineno}: bad value for '{key}': {err}") from None
    raise AssertionError(key)


def parse_config(text: str) -> RunConfig:
    """Parse a flat ``key = value`` config document, applying defaults.

    Unknown and duplicate keys are rejected with the offending line number;
    constraint violations (for example xi > kappa) surface the layer
    validation message.
    """
    seen: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key or not value:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        if key not in CONFIG_KEYS:
            raise ValueError(f"line {lineno}: unknown key '{key}'")
        if key in seen:
            raise ValueError(f"line {lineno}: duplicate key '{key}'")
        seen[key] = _parse_value(key, value, lineno)

    base = RunConfig()
    layer_kwargs = {
        "d_model": seen.get("d_model", base.layer.d_model),
        "n_heads": seen.get("n_heads", base.layer.n_heads),
        "w1": seen.get("w1", base.layer.w1),
        "w2": seen.get("w2", base.layer.w2),
        "kappa": seen.get("kappa", base.layer.kappa),
        "xi": seen.get("xi", base.layer.xi),
        "pooling_kind": seen.get("pooling", base.layer.pooling_kind),
        "second_level_input": (
            "raw_embeddings" if seen.get("mix", base.layer.mix) else "first_level_output"
        ),
        "share_projections": seen.get("share_projections", base.layer.share_projections),
    }
    try:
        layer = LayerConfig(**layer_kwargs)
    except ValueError as err:
        raise ValueError(f"config invalid: {err}") from None
    trials = int(seen.get("trials", base.trials))
    if trials < 1:
        raise ValueError("config invalid: trials must be >= 1")
    return RunConfig(
        layer=layer,
        n_list=tuple(seen.get("n_list", base.n_list)),
        seed=int(seen.get("seed", base.seed)) & _MASK64,
        trials=trials,
    )


def serialize_config(rc: RunConfig) -> str:
    """Canonical config text; ``parse_config(serialize_config(rc)) == rc``."""
    lines = [
        f"d_model = {rc.layer.d_model}",
        f"n_heads = {rc.layer.n_heads}",
        f"w1 = {rc.layer.w1}",
        f"w2 = {rc.layer.w2}",
        f"kappa = {rc.layer.kappa}",
        f"xi = {rc.layer.xi}",
        f"pooling = {rc.layer.pooling_kind}",
        f"mix = {'true' if rc.layer.mix else 'false'}",
        f"share_projections = {'true' if rc.layer.share_projections else 'false'}",
        "n_list = " + ", ".join(str(v) for v in rc.n_list),
        f"seed = {rc.seed}",
        f"trials = {rc.trials}",
    ]
    return "\n".join(lines) + "\n"


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"))


def kernel_for_compression_rate(rate: int) -> tuple[int, int]:
    """(kappa, xi) realizing compression rate C: (C+1, C)."""
    if rate < 1:
        raise ValueError("compression rate must be >= 1")
    return rate + 1, rate


# ---------------------------------------------------------------------------
# finite differences


def central_difference(f, x: np.ndarray, eps: float = GRADCHECK_STEP) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` by central differences, entry by entry."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def max_rel_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-3) -> float:
    """Max elementwise |a-b| / max(floor, |a|, |b|).

    The floor keeps near-zero entries from amplifying finite-difference noise
    (~1e-10 absolute for the 1e-5 step); entries below it are effectively
    compared absolutely at floor * tolerance.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(floor, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def relative_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Max |a-b| normalized by the reference magnitude max|b| (abs if b is 0)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = float(np.max(np.abs(b))) if b.size else 0.0
    diff = float(np.max(np.abs(a - b))) if a.size else 0.0
    return diff / scale if scale > 0.0 else diff


_TRIPLE_FIELDS = ("w_q", "b_q", "w_k", "b_k", "w_v", "b_v")


def _param_entries(params: LayerParams, config: LayerConfig) -> list[str]:
    names = [f"first.{f}" for f in _TRIPLE_FIELDS]
    if not config.share_projections:
        names += [f"second.{f}" for f in _TRIPLE_FIELDS]
    if config.needs_pool_weights:
        names += ["w_p_key", "w_p_value"]
    return names


def _get_param(params: LayerParams, name: str) -> np.ndarray:
    if name.startswith("first."):
        return getattr(params.first, name.split(".", 1)[1])
    if name.startswith("second."):
        return getattr(params.second, name.split(".", 1)[1])
    return getattr(params, name)


def _copy_params(params: LayerParams, config: LayerConfig) -> LayerParams:
    first = ProjectionTriple(*(a.copy() for a in params.first))
    second = first if config.share_projections else ProjectionTriple(
        *(a.copy() for a in params.second)
    )
    wpk = None if params.w_p_key is None else params.w_p_key.copy()
    wpv = None if params.w_p_value is None else params.w_p_value.copy()
    return LayerParams(first, second, wpk, wpv)


def gradcheck_layer(
    config: LayerConfig,
    n: int,
    seed: int,
    global_count: int = 1,
    eps: float = GRADCHECK_STEP,
) -> dict[str, float]:
    """Check every parameter gradient (and the input gradient) of one layer.

    Runs the analytic backward once, then compares each parameter against a
    central finite difference of the scalar loss sum(upstream * output).
    Returns the max relative error per parameter name.
    """
    if n > GRADCHECK_MAX_N:
        raise ValueError(f"gradcheck is limited to n <= {GRADCHECK_MAX_N}")
    batch = synth_batch(n, config.d_model, seed, global_count)
    params = init_params(config, seed + 1)
    upstream = symmetric_uniform(seed + 2, n * config.d_model).reshape(n, config.d_model)

    _, trace = layer_forward(batch, params, config)
    grads = layer_backward(trace, upstream)

    work = _copy_params(params, config)

    def loss(_=None) -> float:
        out, _ = layer_forward(batch, work, config, retain=False)
        return float(np.sum(upstream * out))

    errors: dict[str, float] = {}
    for name in _param_entries(params, config):
        target = _get_param(work, name)
        fd = central_difference(lambda _: loss(), target, eps)
        errors[name] = max_rel_error(_get_param(grads, name), fd)

    emb = batch.embeddings.copy()

    def emb_loss(_=None) -> float:
        out, _ = layer_forward(
            SequenceBatch(emb, batch.pad_mask, batch.global_set), params, config,
            retain=False,
        )
        return float(np.sum(upstream * out))

    fd = central_difference(lambda _: emb_loss(), emb, eps)
    errors["embeddings"] = max_rel_error(grads.embeddings, fd)
    return errors


# ---------------------------------------------------------------------------
# runners


FORWARD_HEADER = (
    "schema", "n", "d_model", "n_heads", "pooling", "checksum",
    "first_score_evals", "second_score_evals", "degenerate_rows",
)
COST_HEADER = (
    "schema", "pattern", "n", "w1", "w2", "kappa", "xi", "n_global",
    "score_evals", "value_accums", "pool_ops", "bytes_touched",
)
ORACLE_DIFF_HEADER = (
    "schema", "check", "pooling", "variant", "n", "max_rel_err", "threshold", "status",
)
GRADCHECK_HEADER = (
    "schema", "n", "pooling", "mix", "share_projections", "param", "max_rel_err",
    "threshold", "status",
)
BENCH_HEADER = (
    "schema", "pattern", "n", "trials", "median_ns", "per_token_ns",
    "score_evals", "est_peak_bytes",
)


def run_forward(rc: RunConfig) -> list[tuple]:
    """Forward the configured layer over each n; report checksums and counters."""
    rows = []
    for n in rc.n_list:
        batch = synth_batch(n, rc.layer.d_model, rc.seed)
        params = init_params(rc.layer, rc.seed + 1)
        out, trace = layer_forward(batch, params, rc.layer, retain=False)
        rows.append((
            SCHEMA_VERSION, n, rc.layer.d_model, rc.layer.n_heads,
            rc.layer.pooling_kind, batch_checksum(out),
            int(trace.first_counts.sum()), int(trace.second_counts.sum()),
            int(trace.degenerate_second.sum()),
        ))
    return rows


def run_cost(rc: RunConfig) -> list[tuple]:
    """Analytic cost table: dense, single-window, and two-level per n."""
    layer = rc.layer
    rows = []
    for n in rc.n_list:
        reports = (
            cost_dense(n, d_model=layer.d_model),
            cost_single_window(n, layer.w1, d_model=layer.d_model),
            cost_two_level(
                n, layer.w1, layer.w2, layer.kappa, layer.xi, d_model=layer.d_model
            ),
        )
        for rep in reports:
            rows.append((
                SCHEMA_VERSION, rep.pattern, rep.n, rep.w1, rep.w2, rep.kappa,
                rep.xi, rep.n_global, rep.score_evals, rep.value_accums,
                rep.pool_ops, rep.bytes_touched,
            ))
    return rows


def _oracle_variants(layer: LayerConfig):
    yield "plain", replace(layer, second_level_input="first_level_output", share_projections=False)
    yield "mix", replace(layer, second_level_input="raw_embeddings", share_projections=False)
    yield "share", replace(layer, second_level_input="first_level_output", share_projections=True)


def run_oracle_diff(rc: RunConfig) -> tuple[list[tuple], bool]:
    """Compare the fast path against every applicable oracle.

    Per n and pooling kind (plain / mix / weight-sharing variants): the first
    level against masked dense attention, the shared-grid second level against
    the literal per-token oracle at full window, and the whole layer against a
    dense two-pass reference with identity pooling.  The shared-vs-literal gap
    at the configured (smaller) w2 is reported as an informational row.
    """
    for n in rc.n_list:
        if n > ORACLE_DIFF_MAX_N:
            raise ValueError(f"oracle-diff is limited to n <= {ORACLE_DIFF_MAX_N}")
    rows: list[tuple] = []
    ok = True

    def record(check, pooling, variant, n, err, informational=False):
        nonlocal ok
        if informational:
            rows.append((SCHEMA_VERSION, check, pooling, variant, n,
                         repr(float(err)), "", "info"))
            return
        passed = err <= ORACLE_DIFF_THRESHOLD
        ok = ok and passed
        rows.append((SCHEMA_VERSION, check, pooling, variant, n,
                     repr(float(err)), repr(ORACLE_DIFF_THRESHOLD),
                     "pass" if passed else "FAIL"))

    case = 0
    for n in rc.n_list:
        g = min(2, n - 1) if n > 1 else 0
        for kind in POOLING_KINDS:
            for variant, layer in _oracle_variants(replace(rc.layer, pooling_kind=kind)):
                case += 1
                seed = rc.seed + 977 * case
                batch = synth_batch(n, layer.d_model, seed, g)

                # first level vs masked dense attention
                params = init_params(layer, seed + 1)
                y, _ = first_level_forward(batch, params, layer)
                record("first_level_vs_masked_dense", kind, variant, n,
                       relative_diff(y, dense_first_level(batch, params, layer)))

                # shared-grid second level vs the literal per-token oracle at w2 = n
                wide = replace(layer, w1=min(layer.w1, n), w2=n)
                params_w = init_params(wide, seed + 1)
                y_w, _ = first_level_forward(batch, params_w, wide)
                z, _ = second_level_forward(batch, y_w, params_w, wide)
                record("second_level_vs_literal", kind, variant, n,
                       relative_diff(z, literal_pooling_attention(batch, y_w, params_w, wide)))

                # whole layer vs dense two-pass reference with identity pooling
                ident = replace(wide, kappa=1, xi=1, w1=n)
                params_i = init_params(ident, seed + 2)
                out, _ = layer_forward(batch, params_i, ident)
                record("layer_vs_dense", kind, variant, n,
                       relative_diff(out, dense_layer_reference(batch, params_i, ident)))

                # informational: shared grid vs literal at the configured w2
                if wide.w2 != layer.w2:
                    z_s, _ = second_level_forward(batch, y, params, layer)
                    z_l = literal_pooling_attention(batch, y, params, layer)
                    record("shared_vs_literal_gap", kind, variant, n,
                           relative_diff(z_s, z_l), informational=True)
    return rows, ok


def run_gradcheck(rc: RunConfig) -> tuple[list[tuple], bool]:
    """Finite-difference check of all parameters for every pooling kind."""
    for n in rc.n_list:
        if n > GRADCHECK_MAX_N:
            raise ValueError(f"gradcheck is limited to n <= {GRADCHECK_MAX_N}")
    rows: list[tuple] = []
    ok = True
    for n in rc.n_list:
        for kind in POOLING_KINDS:
            layer = replace(rc.layer, pooling_kind=kind)
            errors = gradcheck_layer(layer, n, rc.seed)
            for name, err in errors.items():
                passed = err <= GRADCHECK_THRESHOLD
                ok = ok and passed
                rows.append((
                    SCHEMA_VERSION, n, kind,
                    "true" if layer.mix else "false",
                    "true" if layer.share_projections else "false",
                    name, repr(float(err)), repr(GRADCHECK_THRESHOLD),
                    "pass" if passed else "FAIL",
                ))
    return rows, ok


@dataclass(frozen=True)
class BenchRecord:
    pattern: str
    n: int
    trials: int
    median_ns: int
    per_token_ns: float
    score_evals: int
    est_peak_bytes: int

    def row(self) -> tuple:
        return (
            SCHEMA_VERSION, self.pattern, self.n, self.trials, self.median_ns,
            repr(self.per_token_ns), self.score_evals, self.est_peak_bytes,
        )


def _interleaved_medians(points: list[tuple[str, object]], trials: int) -> dict[str, int]:
    """Median wall time per point, timing all points round-robin.

    Interleaving rounds keeps allocator and cache temperature comparable
    across sequence lengths, which sequential per-point timing does not.
    """
    for _, fn in points:
        fn()  # warmup, discarded
    samples: dict[str, list[int]] = {key: [] for key, _ in points}
    for _ in range(trials):
        for key, fn in points:
            t0 = time.perf_counter_ns()
            fn()
            samples[key].append(time.perf_counter_ns() - t0)
    return {key: int(statistics.median(times)) for key, times in samples.items()}


def run_bench(
    rc: RunConfig,
    dense_cap: int = DEFAULT_DENSE_CAP,
    mem_guard_bytes: int = DEFAULT_MEM_GUARD,
) -> tuple[list[BenchRecord], list[str]]:
    """Median-of-trials forward timings: the two-level path over n_list plus a
    dense baseline up to ``dense_cap``.

    Sequence lengths must be ascending; at least 3 timed trials per point (one
    extra warmup trial is discarded).  Points whose analytic peak-memory
    estimate exceeds the guard are skipped with a notice.  BLAS thread pools
    are pinned to one thread during timing when threadpoolctl is available.
    """
    if list(rc.n_list) != sorted(set(rc.n_list)):
        raise ValueError("bench requires strictly ascending n values")
    if rc.trials < 3:
        raise ValueError("bench requires at least 3 trials")
    layer = rc.layer
    notices: list[str] = []
    points: list[tuple[str, object]] = []
    meta: list[tuple[str, str, int, int, int]] = []  # key, pattern, n, score_evals, est

    for n in rc.n_list:
        est = estimate_peak_bytes(
            "two_level", n, layer.d_model, layer.w1, layer.w2, layer.kappa, layer.xi
        )
        if est > mem_guard_bytes:
            notices.append(f"skipped two_level n={n}: estimated {est} bytes over guard")
            continue
        batch = synth_batch(n, layer.d_model, rc.seed)
        params = init_params(layer, rc.seed + 1)
        _, trace = layer_forward(batch, params, layer, retain=False)
        score_evals = int(trace.first_counts.sum() + trace.second_counts.sum())

        def two_level_pass(batch=batch, params=params):
            return layer_forward(batch, params, layer, retain=False)

        key = f"two_level/{n}"
        points.append((key, two_level_pass))
        meta.append((key, "two_level", n, score_evals, est))

    dense_ns = [n for n in rc.n_list if n <= dense_cap]
    if not dense_ns:
        dense_ns = [dense_cap // 4, dense_cap // 2, dense_cap]
    dh, alpha = layer.head_dim, layer.alpha()
    for n in dense_ns:
        est = estimate_peak_bytes("dense", n, layer.d_model)
        if est > mem_guard_bytes:
            notices.append(f"skipped dense n={n}: estimated {est} bytes over guard")
            continue
        batch = synth_batch(n, layer.d_model, rc.seed)
        params = init_params(layer, rc.seed + 1)
        mask = np.ones((n, n), dtype=bool)
        # projections are pattern-independent; time the attention itself
        q, k, v = project_qkv(batch.embeddings, params.first)

        def dense_pass(q=q, k=k, v=v, mask=mask):
            out = np.empty_like(q)
            for h in range(layer.n_heads):
                cols = slice(h * dh, (h + 1) * dh)
                out[:, cols] = dense_attention(
                    q[:, cols], k[:, cols], v[:, cols], mask, alpha
                )
            return out

        key = f"dense/{n}"
        points.append((key, dense_pass))
        meta.append((key, "dense", n, n * n, est))

    limits = threadpool_limits(limits=1) if threadpool_limits is not None else nullcontext()
    with limits:
        medians = _interleaved_medians(points, rc.trials)
    return [
        BenchRecord(pattern, n, rc.trials, medians[key], medians[key] / n, score, est)
        for key, pattern, n, score, est in meta
    ], notices


def write_csv(path: str | Path, header: tuple, rows) -> None:
    """RFC-4180-style CSV (CRLF, quoted as needed), schema column first."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
