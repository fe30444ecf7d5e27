import io

import pytest

from esrules.conn_model import ConnectionRecord, Dataset, Label


def rec(src, dst, port, label="anomalous", **kw):
    base = dict(src_port=1000, duration=5, state=1, protocol=2, bytes_src=10, bytes_dst=20)
    base.update(kw)
    return ConnectionRecord(src_ip=src, dst_ip=dst, dst_port=port, label=Label(label), **base)


@pytest.fixture
def five_records():
    """3 anomalous + 2 normal records on small coordinates."""
    return Dataset((
        rec(5, 5, 5, "anomalous"),
        rec(6, 6, 6, "anomalous"),
        rec(50, 50, 50, "anomalous"),
        rec(7, 7, 7, "normal"),
        rec(90, 90, 90, "normal"),
    ))


def csv_bytes(rows, header="src_ip,dst_ip,src_port,dst_port,duration,state,protocol,bytes_src,bytes_dst,label"):
    return io.BytesIO(("\n".join([header, *rows]) + "\n").encode("utf-8"))
