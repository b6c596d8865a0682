"""Bootstrap-derived priors for linear models, with prior predictive checks."""

import json

from ._core import (
    Error,
    Service,
    derive_priors,
    kde,
    ols_fit,
    parse_model,
    run_check,
    silverman_bandwidth,
    simulate_truth,
)

__all__ = [
    "Error",
    "Service",
    "Session",
    "derive_priors",
    "kde",
    "ols_fit",
    "parse_model",
    "run_check",
    "silverman_bandwidth",
    "simulate_truth",
]


class Session:
    """Thin JSON wrapper around one session of an in-process Service."""

    def __init__(self, formula, seed=None, service=None):
        self.service = service or Service()
        body = {"formula": formula}
        if seed is not None:
            body["seed"] = seed
        self.id = self._call("POST", "/sessions", body)["session_id"]

    def _call(self, method, path, body=None):
        status, text = self.service.handle(method, path, "" if body is None else json.dumps(body))
        doc = json.loads(text) if text else None
        if status >= 300:
            raise Error(doc["code"], doc["message"], doc.get("step", ""))
        return doc

    def request(self, method, sub, body=None):
        return self._call(method, f"/sessions/{self.id}{sub}", body)

    def add_value(self, var, value):
        return self.request("POST", "/values", {"var": var, "value": value})["entity_id"]

    def snapshot(self):
        return self.request("GET", "/snapshot")

    def translate(self, **config):
        return self.request("POST", "/translate", {"bootstrap_config": config})

    def check(self, **config):
        return self.request("POST", "/check", {"predictive_config": config})
