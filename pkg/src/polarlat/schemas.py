"""JSON schemas for run configs and command outputs."""
from __future__ import annotations

_PROB = {"oneOf": [{"type": "number", "minimum": 0},
                   {"type": "string", "pattern": r"^\s*\d+(\.\d*)?(\s*/\s*\d+)?\s*$"}]}
_DIST = {"type": "object", "additionalProperties": _PROB, "minProperties": 1}
_ID = {"type": ["integer", "string"]}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["lattice"],
    "additionalProperties": False,
    "properties": {
        "lattice": {
            "type": "object",
            "required": ["type"],
            "oneOf": [
                {"properties": {"type": {"const": "divisor"},
                                "modulus": {"type": "integer", "minimum": 1}},
                 "required": ["type", "modulus"], "additionalProperties": False},
                {"properties": {"type": {"const": "chain"},
                                "prime": {"type": "integer", "minimum": 2},
                                "height": {"type": "integer", "minimum": 0}},
                 "required": ["type", "prime", "height"], "additionalProperties": False},
                {"properties": {"type": {"const": "explicit"},
                                "elements": {"type": "array", "items": _ID, "minItems": 1},
                                "covers": {"type": "array",
                                           "items": {"type": "array", "items": _ID,
                                                     "minItems": 2, "maxItems": 2}},
                                "order": {"type": "object",
                                          "additionalProperties": {"type": "integer",
                                                                   "minimum": 1}}},
                 "required": ["type", "elements", "covers", "order"],
                 "additionalProperties": False},
            ],
        },
        "source": {
            "type": "object",
            "required": ["kind"],
            "oneOf": [
                {"properties": {"kind": {"const": "stationary"}, "dist": _DIST},
                 "required": ["kind", "dist"], "additionalProperties": False},
                {"properties": {"kind": {"const": "periodic"},
                                "dists": {"type": "array", "items": _DIST, "minItems": 1}},
                 "required": ["kind", "dists"], "additionalProperties": False},
                {"properties": {"kind": {"const": "explicit-prefix"},
                                "prefix": {"type": "array", "items": _DIST},
                                "tail": _DIST},
                 "required": ["kind", "prefix", "tail"], "additionalProperties": False},
            ],
        },
        "normalize": {"type": "boolean"},
        "exact": {"type": "boolean"},
        "workers": {"type": "integer", "minimum": 1},
        "transform": {"type": "object", "additionalProperties": False,
                      "properties": {"levels": {"type": "integer", "minimum": 0},
                                     "window": {"type": "integer", "minimum": 1},
                                     "budget": {"type": "integer", "minimum": 1}}},
        "classify": {"type": "object", "additionalProperties": False,
                     "properties": {"delta": {"type": "number", "exclusiveMinimum": 0}}},
        "asymptotic": {"type": "object", "additionalProperties": False,
                       "properties": {"query": _ID}},
        "montecarlo": {"type": "object", "additionalProperties": False,
                       "properties": {"samples": {"type": "integer", "minimum": 1},
                                      "seed": {"type": "integer", "minimum": 0,
                                               "maximum": 2**64 - 1},
                                      "levels": {"type": "integer", "minimum": 0,
                                                 "maximum": 12},
                                      "tol": {"type": "number", "exclusiveMinimum": 0}}},
        "verify": {"type": "object", "additionalProperties": False,
                   "properties": {"pairs": {"type": "integer", "minimum": 0},
                                  "seed": {"type": "integer", "minimum": 0}}},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"path": {"type": "string"},
                                  "format": {"enum": ["json", "csv"]}}},
    },
}

_NUM = {"type": ["number", "string", "integer"]}
_PROVENANCE = {"config_digest": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
               "seed": {"type": ["integer", "null"]},
               "command": {"type": "string"}}


def _output(required: list, props: dict) -> dict:
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "required": ["config_digest", "seed", "command"] + required,
        "properties": {**_PROVENANCE, **props},
    }


OUTPUT_SCHEMAS = {
    "transform": _output(
        ["n", "m", "entropies", "mu_hat", "unresolved"],
        {"n": {"type": "integer"}, "m": {"type": "integer"},
         "entropies": {"type": "array", "items": {"type": "number"}},
         "mu_hat": {"type": "object", "additionalProperties": {"type": "number"}},
         "unresolved": {"type": "number"},
         "block_entropy_spread": {"type": "number"},
         "delta": {"type": "number"}}),
    "asymptotic": _output(
        ["mu", "chain", "entropy_q", "entropy_mu", "trace"],
        {"mu": {"type": "object", "additionalProperties": _NUM},
         "chain": {"type": "array"},
         "entropy_q": {"type": "number"},
         "entropy_mu": {"type": "number"},
         "entropy_exact_match": {"type": "boolean"},
         "trace": {"type": "array", "items": {"type": "object",
                                               "required": ["K", "branch", "mu"]}},
         "shortcut": {"type": ["string", "null"]}}),
    "simulate": _output(
        ["per_index", "pass"],
        {"per_index": {"type": "array", "items": {
            "type": "object",
            "required": ["order_hist", "tv_max", "entropy_hat", "sigma"],
            "properties": {"order_hist": {"type": "object",
                                          "additionalProperties": {"type": "integer"}},
                           "tv_max": {"type": "number"},
                           "entropy_hat": {"type": "number"},
                           "sigma": {"type": "number"}}}},
         "pass": {"type": "boolean"},
         "quotient_gate": {"type": "object"}}),
    "verify": _output(
        ["laws", "identities", "pass"],
        {"laws": {"type": "object"}, "identities": {"type": "object"},
         "violations": {"type": "array"}, "pass": {"type": "boolean"}}),
}
