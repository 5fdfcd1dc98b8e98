"""Syscall allowlist generation from library IR and binary disassembly.

Thin wrappers over the native module: configs are keyword arguments, JSON
artifacts come back as parsed objects.
"""

import json

try:
    from . import _secforge as _native
except ImportError:  # running against a CMake build tree on PYTHONPATH
    import _secforge as _native

AnalysisError = _native.AnalysisError
PipelineConfig = _native.PipelineConfig

__all__ = [
    "AnalysisError",
    "PipelineConfig",
    "analyze_lib",
    "scan_bin",
    "gen_profile",
    "run_pipeline",
    "simulate",
    "score_cve",
    "optimize_order",
    "denied_count",
]


def _config(kw):
    cfg = PipelineConfig()
    for key, value in kw.items():
        if not hasattr(cfg, key):
            raise TypeError(f"unknown config field {key!r}")
        setattr(cfg, key, value)
    return cfg


def _text(profile):
    if isinstance(profile, str):
        return profile
    return json.dumps(profile)


def analyze_lib(**kw):
    """API to syscall map for the configured library, as a dict."""
    return json.loads(_native.analyze_lib(_config(kw)))


def scan_bin(**kw):
    """Callsite and direct-syscall report for the configured binary."""
    return json.loads(_native.scan_bin(_config(kw)))


def gen_profile(map_json, scan_json, **kw):
    """Seccomp profile composed from a map and a scan, as a dict."""
    return json.loads(_native.gen_profile(_config(kw), _text(map_json), _text(scan_json)))


def run_pipeline(**kw):
    """Full chain; returns a dict of artifact names to written paths."""
    return dict(_native.run_pipeline(_config(kw)))


def simulate(profile, table_path, trace_text, jobs=1):
    """Replay a JSONL trace against a profile; returns the count report."""
    return json.loads(_native.simulate(_text(profile), str(table_path), trace_text, jobs))


def score_cve(profile, table_path, cve_map_path, flags_path):
    """Mitigation classification for each CVE map entry."""
    return json.loads(
        _native.score_cve(_text(profile), str(table_path), str(cve_map_path), str(flags_path))
    )


def optimize_order(profile, freq):
    """Profile with rules reordered by observed frequency."""
    return json.loads(_native.optimize_order(_text(profile), dict(freq)))


def denied_count(profile, table_path):
    """Number of table syscalls the profile leaves blocked."""
    return _native.denied_count(_text(profile), str(table_path))
