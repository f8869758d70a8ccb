import importlib.util
import json
import os
import sys

import numpy as np
import scipy.sparse as sp

from multicontact.cones import ConeSpec
from multicontact.socp import ConicProgram

TESTS_DIR = os.path.dirname(__file__)
REPO_DIR = os.path.normpath(os.path.join(TESTS_DIR, ".."))
SCENARIO_DIR = os.path.join(REPO_DIR, "scenarios")
SCRIPTS_DIR = os.path.join(REPO_DIR, "scripts")
DATA_DIR = os.path.join(TESTS_DIR, "data")


def load_script(name):
    """Import a repo script as a module (scripts/ is not a package)."""
    path = os.path.join(SCRIPTS_DIR, name + ".py")
    spec = importlib.util.spec_from_file_location(name, path)
    module = importlib.util.module_from_spec(spec)
    sys.modules[name] = module
    spec.loader.exec_module(module)
    return module


def oracle_instances():
    """Regenerate the frozen-oracle cone programs from the recorded seed.

    Mirrors the draw order of the generator script exactly, so instance i
    here is the instance whose reference objective sits at index i in
    tests/data/socp_oracle.json.
    """
    with open(os.path.join(DATA_DIR, "socp_oracle.json")) as fh:
        doc = json.load(fh)
    gen = load_script("gen_socp_oracle")
    rng = np.random.default_rng(doc["seed"])
    instances = []
    for record in doc["instances"]:
        n = int(rng.integers(5, 13))
        n_orth = int(rng.integers(1, 6))
        soc_dims = [int(rng.integers(2, 5))
                    for _ in range(int(rng.integers(1, 3)))]
        inst = gen.make_instance(rng, n, n_orth, soc_dims)
        instances.append((inst, record))
    return instances


def program_from_instance(inst) -> ConicProgram:
    return ConicProgram(
        objective=inst["c"],
        eq_matrix=sp.csc_matrix(inst["A"]),
        eq_rhs=inst["b"],
        ineq_matrix=sp.csc_matrix(inst["G"]),
        ineq_rhs=inst["h"],
        cone=ConeSpec(nonneg=inst["nonneg"],
                      soc_dims=tuple(inst["soc_dims"])),
    )
