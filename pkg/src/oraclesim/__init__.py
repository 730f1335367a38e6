"""Deterministic desk-scale simulator of the early Bitcoin oracle protocols.

The package is organised around a minimal UTXO host chain (`simchain`) with
standardness-aware relay and mining, a fixture-backed data layer
(`datafeed`), and one module per oracle protocol generation:

- `will_oracle`     single-oracle co-signed "will" contracts
- `realitykeys`     off-chain yes/no fact registry with key release
- `orisi`           multi-oracle padded-multisig "safe" contracts
- `truthcoin`       sidechain prediction markets with voted resolution
- `counterparty`    meta-chain state replication over host transactions
- `oraclize`        polled conditional contracts with authenticity proofs

`harness` binds everything into a scenario runner and CLI.  All randomness
flows through explicitly seeded generators; two runs of the same scenario
produce byte-identical event logs.
"""

__version__ = "0.1.0"
