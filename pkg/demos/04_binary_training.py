"""
Training a tiny hybrid network
==============================

Trains a small quantum-filter network (2x2 filters, max pooling, a second
filter layer, global average pooling as the classifier head) on a synthetic
two-class problem and prints the metrics the trainer writes to metrics.csv.
The two classes differ only in *where* a bright band sits, so a single
filter layer followed straight by averaging cannot tell them apart; the
pooling step keeps enough position information.  Takes well under a minute.
"""
import tempfile

from qfenet.config import RunConfig
from qfenet.trainer import train

config = RunConfig(
    model_layers="qfe:2,pool,qfe:2,gap", model_kernel=2, model_classes="0,1",
    ansatz_name="sim15", ansatz_layers=1,
    train_seed=0, train_epochs=3, train_schedule="constant", train_lr=0.1, train_batch=10,
    data_source="stub", data_n_train=60, data_n_test=20, data_stub_size=5,
    out_dir=tempfile.mkdtemp(prefix="qfenet-demo-"),
)

result = train(config)
print(f"{'epoch':>5s} {'split':>5s} {'cost':>8s} {'acc':>6s} {'sims':>8s}")
for r in result.records:
    print(f"{r.epoch:5d} {r.split:>5s} {r.cost:8.4f} {r.accuracy:6.3f} {r.sims:8d}")
print("checkpoint:", result.checkpoint)
