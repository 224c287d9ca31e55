import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

import mars_rm as m


def test_scalar_functions():
    assert m.sigmoid(0.0) == 0.5
    assert abs(m.curvature_weight(2.0) - 0.10499358540350651734862418476) < 1e-15
    q = m.allocate([0.0, 10.0], 0.1)
    assert abs(q[0] - math.e / (math.e + 1)) < 1e-12
    assert m.round_budget([0.5, 0.3, 0.2], 10) == [5, 3, 2]
    assert m.split_counts(5) == (3, 2)


def test_tuples_and_training():
    data = [m.PreferenceTuple(f"z{i}", [1.0 + i, 0.5], [0.0, 1.0]) for i in range(5)]
    assert data[0].psi == [1.0, -0.5]
    params = m.train(m.RewardParams.zeros(2), data)
    assert m.pairwise_accuracy(params, data) == 1.0
    assert m.nll_loss(params, data) < math.log(2)
    with pytest.raises(m.DimensionError):
        m.PreferenceTuple("bad", [1.0], [1.0, 2.0])
    with pytest.raises(m.MarsError):
        m.PreferenceTuple("bad", [], [])


def test_refinement_run():
    spec = m.SyntheticSpec()
    spec.dim, spec.n = 4, 60
    theta = m.random_params(4, 1.0, 1)
    data = m.generate_synthetic(spec, theta)
    cfg = m.MarsConfig()
    cfg.epochs_T, cfg.budget_B = 2, 120
    res = m.run_mars(data, m.RewardParams.zeros(4), cfg)
    assert len(res.reports) == 2
    for rep in res.reports:
        assert rep.plan.total_counts() == 120
        assert rep.dataset_size_after == rep.dataset_size_before + rep.synthetic_added
    again = m.run_mars(data, m.RewardParams.zeros(4), cfg)
    assert again.params.theta == res.params.theta


def test_curvature_analysis():
    rep = m.verify_theorem(dim=4, seed=3)
    assert rep.passed
    assert [c.alpha for c in rep.checks] == [0.0, 0.25, 0.5, 0.75, 1.0]
    spec = m.SyntheticSpec()
    spec.n = 500
    theta = m.random_params(spec.dim, 1.0, 2)
    bins = m.bin_by_margin(theta, m.generate_synthetic(spec, theta), 5)
    weights = [b.mean_curvature_weight for b in bins]
    assert weights == sorted(weights, reverse=True)
    fisher = m.empirical_fisher(theta, m.generate_synthetic(spec, theta))
    assert len(fisher) == spec.dim


class _Paraphraser(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_GET(self):
        self.send_response(200 if self.path == "/healthz" else 404)
        self.end_headers()

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        n = body["n"]
        if n > 5:
            payload, code = {"error": "cannot satisfy n"}, 422
        else:
            payload, code = {"variants": [f"{body['text']} v{i}" for i in range(n)]}, 200
        raw = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)


@pytest.fixture
def paraphraser():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Paraphraser)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def _text_data():
    return [
        m.PreferenceTuple(
            f"t{i}",
            m.featurize(f"good answer {i}", 16),
            m.featurize("bad", 16),
            m.TextPair("q", f"good answer {i}", "bad"),
        )
        for i in range(4)
    ]


def _service_spec(endpoint):
    aug = m.AugmenterSpec()
    aug.kind = m.AugmenterKind.external_service
    aug.endpoint = endpoint
    aug.featurizer_dim = 16
    aug.timeout_ms = 2000
    return aug


def test_external_service_stub(paraphraser):
    cfg = m.MarsConfig()
    cfg.epochs_T, cfg.budget_B = 1, 8
    res = m.run_mars(_text_data(), m.RewardParams.zeros(16), cfg, augmenter=_service_spec(paraphraser))
    synthetic = [z for z in res.final_dataset if z.origin == m.Origin.synthetic]
    assert len(synthetic) == res.reports[0].synthetic_added > 0
    assert any(z.text.chosen.endswith(" v0") for z in synthetic)


def test_external_service_rejects_unsatisfiable(paraphraser):
    cfg = m.MarsConfig()
    cfg.epochs_T, cfg.budget_B = 1, 60
    with pytest.raises(m.MarsRunError, match="422"):
        m.run_mars(_text_data(), m.RewardParams.zeros(16), cfg, augmenter=_service_spec(paraphraser))
