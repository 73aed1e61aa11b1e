"""Multi-asset UTXO ledger with limited liabilities, babel fee market, block selection and liveness simulation."""
from .quantities import AssetId, Quantities, ZERO
from .ledger import Batch, Input, Interval, Ledger, Output, OutputRef, Tx, tx_id
from .validation import apply_batch, check_conditional_validity, is_fully_valid_ledger

__all__ = [
    "AssetId", "Quantities", "ZERO",
    "Batch", "Input", "Interval", "Ledger", "Output", "OutputRef", "Tx", "tx_id",
    "apply_batch", "check_conditional_validity", "is_fully_valid_ledger",
]
