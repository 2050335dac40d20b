"""What the two weight-selection strategies actually ship.

On noisy data a client's validation score often peaks before the last local
epoch. FEWS uploads the final epoch regardless; OEWS uploads the best one.
This script shows one client's validation trace and both choices, then runs
the full federation both ways.

Run:  python3 demos/03_picking_the_epoch.py
"""

from dataclasses import replace

from fedsel.data import PartitionSpec, make_dataset
from fedsel.nn import init_parameters
from fedsel.orchestrator import FederationConfig, client_stream, run_federation
from fedsel.presets import get_preset
from fedsel.strategies import StrategyKind, run_local

preset = get_preset("elevated_noise")
seed = 7
corpus = replace(preset.corpus, seed=seed)
clients, evals = make_dataset(corpus, PartitionSpec.default())
model = preset.model()

# one client, one round, by hand
result = run_local(
    init_parameters(model), model, clients[0], preset.optimizer,
    preset.local_epochs, StrategyKind.OEWS, client_stream(seed, 1, 0),
)
print("client 0, round 1, per-epoch validation macro-F1:")
for epoch, value in enumerate(result.trace, start=1):
    marker = ""
    if epoch == result.selected_epoch:
        marker = "  <- OEWS ships this"
    elif epoch == len(result.trace):
        marker = "  <- FEWS ships this"
    print(f"  epoch {epoch:2d}: {value:.4f}{marker}")

# same schedule end to end, both strategies
print("\nfull federation, both strategies:")
for strategy in (StrategyKind.FEWS, StrategyKind.OEWS):
    cfg = FederationConfig(
        model=model,
        rounds=preset.rounds,
        local_epochs=preset.local_epochs,
        optimizer=preset.optimizer,
        strategy=strategy,
        master_seed=seed,
    )
    records, _ = run_federation(cfg, clients, evals)
    final = records[-1].global_metrics
    epochs = ",".join(str(e) for e in records[-1].selected_epochs)
    print(
        f"  {strategy.value}: global accuracy {final.accuracy:.4f}, "
        f"macro-F1 {final.macro_f1:.4f} (last-round selected epochs: {epochs})"
    )
