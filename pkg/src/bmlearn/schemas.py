"""JSON schemas for everything the command line writes."""

from __future__ import annotations

_num = {"type": "number"}
_num_or_null = {"type": ["number", "null"]}
_int = {"type": "integer"}
_labels = {"type": "array", "items": {"enum": [-1, 1]}}

SQDIM = {
    "type": "object",
    "required": ["dim", "witness", "mode"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "witness": {"type": "array", "items": _int},
        "mode": {"enum": ["exact", "greedy", "ball"]},
        "mu": _num,
        "best_Q": {"type": "array", "items": _num},
        "restarts": _int,
        "heuristic": {"type": "boolean"},
    },
}

BOOST_TRIAL = {
    "type": "object",
    "required": ["rounds_used", "samples_consumed", "queries_consumed", "min_tolerance",
                 "bits_counted", "final_loss", "aborted"],
    "properties": {
        "rounds_used": _int,
        "samples_consumed": {"type": ["integer", "number"]},
        "queries_consumed": _int,
        "min_tolerance": _num_or_null,
        "bits_counted": _int,
        "final_loss": _num_or_null,
        "aborted": {"type": "boolean"},
    },
}

BOOST = {
    "type": "object",
    "required": ["trials", "aggregates"],
    "properties": {"trials": {"type": "array", "items": BOOST_TRIAL}, "aggregates": {"type": "object"}},
}

REDUCE = {
    "type": "object",
    "required": ["output_hypothesis", "samples_or_queries", "tolerance", "bits", "success"],
    "properties": {
        "output_hypothesis": {"oneOf": [_labels, {"type": "null"}]},
        "samples_or_queries": {"type": ["integer", "number"]},
        "tolerance": _num_or_null,
        "bits": {"type": ["integer", "null"]},
        "success": {"type": "boolean"},
    },
}

RUN_TRACE = {
    "type": "object",
    "required": ["samples_consumed", "bits_declared", "bits_max_observed", "final_loss", "success", "events"],
    "properties": {
        "samples_consumed": _int,
        "bits_declared": _int,
        "bits_max_observed": _int,
        "final_loss": _num,
        "success": {"type": "boolean"},
        "events": {"type": "array", "items": {"type": "object"}},
    },
}

BENCH = {
    "type": "object",
    "required": ["suite", "passed"],
    "properties": {
        "suite": {"enum": ["acceptance", "smoke", "calibration"]},
        "passed": {"type": "boolean"},
        "criteria": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["criterion", "title", "passed", "seconds", "metrics"],
            },
        },
    },
}

ORACLE_TRACE_ENTRY = {
    "type": "object",
    "required": ["query_index", "tolerance", "answer", "eliminated_count"],
    "properties": {
        "query_index": _int,
        "hypothesis_id": _int,
        "labels": _labels,
        "tolerance": _num,
        "answer": _num,
        "eliminated_count": _int,
    },
    "anyOf": [{"required": ["hypothesis_id"]}, {"required": ["labels"]}],
}

BY_COMMAND = {
    "sqdim": SQDIM,
    "ball": SQDIM,
    "boost": BOOST,
    "sqboost": BOOST,
    "reduce": REDUCE,
    "stream": RUN_TRACE,
    "bench": BENCH,
}

# column sets of the CSV forms; kept stable
CSV_COLUMNS = {
    "boost": ["trial", "seed", "target", "rounds_used", "samples_consumed", "queries_consumed",
              "min_tolerance", "bits_counted", "final_loss", "aborted"],
    "sqboost": ["trial", "seed", "target", "rounds_used", "samples_consumed", "queries_consumed",
                "min_tolerance", "bits_counted", "final_loss", "aborted"],
    "sqdim": ["dim", "witness", "mode"],
    "ball": ["dim", "witness", "mode", "mu"],
    "reduce": ["output_hypothesis", "samples_or_queries", "tolerance", "bits", "success"],
    "stream": ["samples_consumed", "bits_declared", "bits_max_observed", "final_loss", "success"],
    "bench": ["criterion", "title", "passed", "seconds"],
}
