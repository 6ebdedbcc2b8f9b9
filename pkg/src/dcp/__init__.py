"""Privacy-preserving in-vehicle payer identification.

A dashcam party holds only encrypted biometric templates and public keys of
connected mobile devices. Face matches prescreen candidate payers; a voice
match at pay time picks the payer. Scores are computed homomorphically at the
dashcam, decrypted on the owning device, and attested back with zero-knowledge
match proofs, so the dashcam learns exactly one bit per device per round.
"""

from .command import (
    Dictionary,
    PaymentCommand,
    correct_token,
    detect_trigger,
    evaluate_corpus,
    levenshtein,
    load_corpus,
    parse_command,
)
from .embedding import (
    Embedding,
    IdentityProfile,
    QuantizedTemplate,
    cosine_to_score,
    inner_product_int,
    quantize,
    sample_observation,
    score_to_cosine,
    score_to_sq_euclidean,
)
from .errors import DcpError
from .he import (
    Ciphertext,
    EncryptedTemplate,
    GroupParams,
    KeyPair,
    PublicKey,
    add,
    ciphertext_expansion,
    decrypt,
    encrypt,
    encrypt_template,
    encrypted_inner_product,
    keygen,
    scalar_mul,
    secure_params,
    test_params,
)
from .protocol import (
    DashcamState,
    DecisionOutcome,
    DeviceState,
    PayerDecision,
    dashcam_step,
    device_step,
    enroll_device,
    identify_payer,
    make_dashcam,
    prescreen_faces,
    request_payment,
)
from .scenario import Scenario, builtin_scenario, load_scenario, save_scenario
from .simulator import (
    RideReport,
    bench_comparison,
    build_world,
    plaintext_oracle,
    run_batch,
    run_scenario,
    run_scenario_detailed,
)
from .transport import BLE, WIFI, TransportProfile, simulate_transfer
from .wire import ProtocolMessage, decode, encode
from .zkp import (
    MatchProof,
    MatchResult,
    ProofContext,
    Threshold,
    commit,
    derive_challenge,
    prove_match,
    verify_match,
)

__version__ = "0.1.0"
