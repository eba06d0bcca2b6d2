import io
import json
import subprocess
import sys

import numpy as np
import pytest

import spoofkit as sk
from spoofkit.errors import ProtocolError, TransportError
from spoofkit.wire import ServerInfo, decode_message, encode_message


def test_message_framing():
    line = encode_message({"op": "hello"})
    assert line.endswith(b"\n")
    assert decode_message(line) == {"op": "hello"}
    with pytest.raises(ProtocolError):
        decode_message(b"{not json}\n")
    with pytest.raises(ProtocolError):
        decode_message(b"[1, 2]\n")


def _client_with_reply(reply: dict, info=None) -> sk.WireClient:
    client = sk.WireClient(io.BytesIO(encode_message(reply)), io.BytesIO())
    client.info = info
    return client


def test_hello_handshake_tcp():
    handler = sk.UniformStubHandler(7, (3, 4, 4))
    with sk.WireServer(handler) as server:
        with sk.WireClient.connect_tcp(*server.address) as client:
            info = client.hello()
            assert info.num_classes == 7
            assert info.input_shape == (3, 4, 4)


def test_stub_returns_uniform():
    handler = sk.UniformStubHandler(4, (1, 2, 2))
    with sk.WireServer(handler) as server:
        with sk.WireClient.connect_tcp(*server.address) as client:
            probs = client.predict(np.zeros((3, 1, 2, 2)))
            assert probs.shape == (3, 4)
            assert np.all(probs == 0.25)


def test_loopback_preserves_values_exactly():
    captured = {}

    class Capture:
        num_classes = 2
        input_shape = (1, 2, 2)

        def predict(self, batch):
            captured["batch"] = batch
            return np.array([[0.123456789123, 0.876543210877]] * batch.shape[0])

    rng = np.random.default_rng(3)
    sent = rng.random((1, 1, 2, 2))
    with sk.WireServer(Capture()) as server:
        with sk.WireClient.connect_tcp(*server.address) as client:
            probs = client.predict(sent)
    # float64 values survive the JSON round trip bit-for-bit
    assert np.array_equal(captured["batch"], sent)
    assert probs[0, 0] == 0.123456789123


def test_server_error_frame_raises_transport_error():
    class Failing:
        num_classes = 2
        input_shape = (1, 2, 2)

        def predict(self, batch):
            raise RuntimeError("model exploded")

    with sk.WireServer(Failing()) as server:
        with sk.WireClient.connect_tcp(*server.address) as client:
            with pytest.raises(TransportError) as exc:
                client.predict(np.zeros((1, 1, 2, 2)))
            assert "model exploded" in str(exc.value)
            assert exc.value.request_id == 1


def test_server_rejects_wrong_shape():
    handler = sk.UniformStubHandler(2, (1, 2, 2))
    with sk.WireServer(handler) as server:
        with sk.WireClient.connect_tcp(*server.address) as client:
            client.info = ServerInfo(2, (1, 3, 3))  # lie about the shape
            with pytest.raises(TransportError, match="shape"):
                client.predict(np.zeros((1, 1, 3, 3)))


def test_client_rejects_wrong_op():
    client = _client_with_reply({"op": "probs", "id": 1, "probs": [[0.5, 0.5]]})
    with pytest.raises(ProtocolError):
        client.hello()


def test_client_rejects_id_mismatch():
    client = _client_with_reply(
        {"op": "probs", "id": 99, "probs": [[0.5, 0.5]]}, info=ServerInfo(2, (1, 2, 2))
    )
    with pytest.raises(ProtocolError, match="id"):
        client.predict(np.zeros((1, 1, 2, 2)))


def test_client_rejects_wrong_length_rows():
    client = _client_with_reply(
        {"op": "probs", "id": 1, "probs": [[0.5, 0.3, 0.2]]}, info=ServerInfo(2, (1, 2, 2))
    )
    with pytest.raises(ProtocolError, match="probabilities"):
        client.predict(np.zeros((1, 1, 2, 2)))


def test_client_rejects_row_count_mismatch():
    client = _client_with_reply(
        {"op": "probs", "id": 1, "probs": [[0.5, 0.5]]}, info=ServerInfo(2, (1, 2, 2))
    )
    with pytest.raises(ProtocolError, match="rows"):
        client.predict(np.zeros((2, 1, 2, 2)))


def test_client_eof_is_transport_error():
    client = sk.WireClient(io.BytesIO(b""), io.BytesIO())
    with pytest.raises(TransportError, match="closed"):
        client.hello()


def test_serve_stdio_in_process():
    handler = sk.UniformStubHandler(3, (1, 2, 2))
    requests = encode_message({"op": "hello"})
    requests += encode_message(
        {"op": "predict", "id": 5, "shape": [1, 1, 2, 2], "data": [0.0, 0.25, 0.5, 1.0]}
    )
    requests += encode_message({"op": "bogus"})
    requests += b"this is not json\n"
    out = io.BytesIO()
    sk.serve_stdio(handler, stdin=io.BytesIO(requests), stdout=out)
    replies = [json.loads(line) for line in out.getvalue().splitlines()]
    assert replies[0] == {"op": "hello", "num_classes": 3, "input_shape": [1, 2, 2]}
    assert replies[1]["op"] == "probs" and replies[1]["id"] == 5
    assert replies[1]["probs"] == [[1 / 3, 1 / 3, 1 / 3]]
    assert replies[2]["op"] == "error" and "bogus" in replies[2]["message"]
    assert replies[3]["op"] == "error" and replies[3]["id"] == 0


def test_server_validates_predict_fields():
    handler = sk.UniformStubHandler(2, (1, 2, 2))
    bad = [
        {"op": "predict", "shape": [1, 1, 2, 2], "data": [0.0] * 4},  # no id
        {"op": "predict", "id": 1, "shape": [1, 2, 2], "data": [0.0] * 4},  # 3-d shape
        {"op": "predict", "id": 2, "shape": [1, 1, 2, 2], "data": [0.0] * 3},  # short data
    ]
    requests = b"".join(encode_message(m) for m in bad)
    out = io.BytesIO()
    sk.serve_stdio(handler, stdin=io.BytesIO(requests), stdout=out)
    replies = [json.loads(line) for line in out.getvalue().splitlines()]
    assert all(r["op"] == "error" for r in replies)
    assert replies[0]["id"] == 0
    assert replies[2]["id"] == 2


def test_spawned_stdio_subprocess_round_trip():
    args = [
        sys.executable,
        "-m",
        "spoofkit.cli",
        "serve-stub",
        "--stdio",
        "--num-classes",
        "5",
        "--input-shape",
        "1,3,3",
    ]
    with sk.WireClient.spawn(args) as client:
        info = client.hello()
        assert info.num_classes == 5
        probs = client.predict(np.zeros((2, 1, 3, 3)))
        assert np.all(probs == 0.2)


def test_remote_oracle_over_stub():
    handler = sk.UniformStubHandler(4, (1, 2, 2))
    with sk.WireServer(handler) as server:
        oracle = sk.RemoteOracle.connect_tcp(*server.address, batch_capacity=2)
        try:
            probs = oracle.predict(np.zeros((5, 1, 2, 2)))
            assert probs.shape == (5, 4)
            assert oracle.query_count == 5
        finally:
            oracle.close()
