"""
Scanning engine: ingestion, block extraction, signatures, matching and canonicalization.
Engine modules never log; they raise typed errors or collect warnings.
"""
