"""Acceptance gate for the sidecar: one PASS/FAIL line per criterion."""

import numpy as np


def check(name, fn):
    try:
        detail = fn()
    except BaseException as exc:
        print(f"FAIL {name}: {exc}")
        raise
    print(f"PASS {name}" + (f" ({detail})" if detail else ""))


def random_texts(n: int, max_tokens: int = 28) -> list[str]:
    rng = np.random.default_rng(41)
    letters = "abcdefghijklmnopqrstuvwxyz"
    spice = ["café", "über", "naïve"]
    out = []
    while len(out) < n:
        words = []
        budget = int(rng.integers(3, max_tokens))
        used = 0
        while used < budget:
            if rng.random() < 0.1:
                w = spice[int(rng.integers(len(spice)))]
            else:
                w = "".join(letters[int(rng.integers(26))]
                            for _ in range(int(rng.integers(1, 5))))
            # char-level wordpiece: every letter costs one window token
            cost = len(w)
            if used + cost > budget:
                break
            words.append(w)
            used += cost
        if not words:
            continue
        text = " ".join(words)
        if rng.random() < 0.4:
            text += "."
        out.append(text)
    return out


def test_pooled_matches_client_side_token_mean(client):
    def body():
        worst = 0.0
        texts = random_texts(20)
        for text in texts:
            tok = client.post("/v1/token_embeddings",
                              json={"model": "tiny", "text": text}).json()
            mean = np.mean(np.asarray(tok["vectors"]), axis=0)
            mean = mean / np.linalg.norm(mean)
            pooled = client.post(
                "/v1/embeddings",
                json={"model": "tiny", "texts": [text]}).json()["vectors"][0]
            worst = max(worst, float(np.max(np.abs(mean - pooled))))
            assert np.allclose(mean, pooled, atol=1e-4), text
        return f"{len(texts)} texts, max |diff| = {worst:.2e} <= 1e-4"

    check("pooled endpoint equals client-side mean of token vectors", body)


def test_offset_round_trip(client):
    def body():
        texts = random_texts(100)
        n_tokens = 0
        for text in texts:
            resp = client.post("/v1/token_embeddings",
                               json={"model": "tiny", "text": text})
            assert resp.status_code == 200, text
            data = resp.json()
            raw = text.encode("utf-8")
            for token, (s, e) in zip(data["tokens"], data["offsets"]):
                assert raw[s:e].decode("utf-8") == token, (text, token, s, e)
                n_tokens += 1
        return f"100 texts, {n_tokens} token slices reproduced exactly"

    check("offset round-trip: byte spans reproduce every token surface form",
          body)
