import enum


class Provenance(str, enum.Enum):
    """
    Enumeration of model provenance tags.
    """
    SOURCE = "source"
    IRRELEVANT = "irrelevant"
    IRRELEVANT_TRANSFER = "irrelevantTransfer"
    SURROGATE = "surrogate"
    FINETUNE_A = "finetuneA"
    FINETUNE_L = "finetuneL"
    PRUNED = "pruned"
    EXTRACT_L = "extractL"
    EXTRACT_P = "extractP"
    EXTRACT_ADV = "extractAdv"
    TRANSFER_A = "transferA"
    TRANSFER_L = "transferL"


STOLEN_TAGS = (
    Provenance.FINETUNE_A, Provenance.FINETUNE_L, Provenance.PRUNED,
    Provenance.EXTRACT_L, Provenance.EXTRACT_P, Provenance.EXTRACT_ADV,
    Provenance.TRANSFER_A, Provenance.TRANSFER_L,
)

TRANSFER_TAGS = (Provenance.TRANSFER_A, Provenance.TRANSFER_L)


def reference_group(tag: Provenance) -> Provenance:
    """
    Irrelevant group a stolen tag is scored against.
    """
    return Provenance.IRRELEVANT_TRANSFER if tag in TRANSFER_TAGS else Provenance.IRRELEVANT


class JobStatus(str, enum.Enum):
    """
    Enumeration of ledger job states.
    """
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"
