import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def fixture_model():
    from ttasr import container
    return container.load_model_file(os.path.join(FIXTURES, "model.ttrd"))


@pytest.fixture(scope="session")
def fixture_graph():
    from ttasr import wfst
    return wfst.load_graph_dir(os.path.join(FIXTURES, "graph"))


@pytest.fixture(scope="session")
def fixture_feats(fixture_model):
    from ttasr import features
    feat_dir = os.path.join(FIXTURES, "feats")
    out = []
    for name in sorted(os.listdir(feat_dir)):
        path = os.path.join(feat_dir, name)
        out.append((features.utt_id_for(path),
                    features.read_features(path, fixture_model.config.feat_dim)))
    return out


def read_refs(name):
    refs = {}
    with open(os.path.join(FIXTURES, name)) as fh:
        for line in fh:
            parts = line.split()
            if parts:
                refs[parts[0]] = parts[1:]
    return refs
