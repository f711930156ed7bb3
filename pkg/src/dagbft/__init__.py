"""Two-round uncertified-DAG Byzantine consensus over a deterministic simulator.

The package is organised as a library:

- :mod:`dagbft.committee`   -- validator sets, n = 5f+1 thresholds, leader schedule
- :mod:`dagbft.types`       -- blocks, references, transactions, wire format
- :mod:`dagbft.dag`         -- the block store, validation, support/link predicates
- :mod:`dagbft.committer`   -- the two-round wave decision rules
- :mod:`dagbft.linearizer`  -- commit sequencing and total-order emission
- :mod:`dagbft.validator`   -- the per-validator state machine (incl. fault modes)
- :mod:`dagbft.simnet`      -- discrete-event network simulation
- :mod:`dagbft.scenario`    -- scenario files and parameter handling
- :mod:`dagbft.report`      -- run reports, commit logs, verification, summaries
- :mod:`dagbft.cli`         -- the ``dagbft run|verify|summarize`` harness
"""

from dagbft.committee import Committee
from dagbft.types import Block, BlockRef, Transaction, genesis_blocks
from dagbft.dag import DagStore, ValidationResult, is_support, link
from dagbft.committer import Committer, LeaderSlot, LeaderStatus, SlotState
from dagbft.linearizer import CommitRecord, Linearizer
from dagbft.scenario import Scenario, load_scenario
from dagbft.simnet import RunReport, run_scenario

__all__ = [
    "Block",
    "BlockRef",
    "CommitRecord",
    "Committee",
    "Committer",
    "DagStore",
    "LeaderSlot",
    "LeaderStatus",
    "Linearizer",
    "RunReport",
    "Scenario",
    "SlotState",
    "Transaction",
    "ValidationResult",
    "genesis_blocks",
    "is_support",
    "link",
    "load_scenario",
    "run_scenario",
]

__version__ = "0.1.0"
