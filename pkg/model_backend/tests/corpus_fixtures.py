from model_backend.data import CSV_HEADER


def write_corpus(path, pairs):
    path.write_text(CSV_HEADER + "\n"
                    + "\n".join(f"{s},{t}" for s, t in pairs) + "\n")
    return path


def echo_corpus(n, tid0=0):
    """Write-single-register frames answered by their own echo."""
    pairs = []
    for i in range(n):
        tid = (tid0 + i) & 0xFFFF
        frame = f"{tid:04x}000000060106{i % 40:04x}{i % 10:04x}"
        pairs.append((frame, frame))
    return pairs


def read_reply_corpus(n=10):
    """Read requests mapped to fixed read responses; valid frames so the
    same fixture drives the honeypot integration test."""
    pairs = []
    for i in range(n):
        request = f"00{i:02x}00000006010300{i:02x}0001"
        response = f"00{i:02x}0000000501030200{i % 10:02x}"
        pairs.append((request, response))
    return pairs
