import os


class Settings:
    LOG_LEVEL = os.getenv("KVBEAM_LOG_LEVEL", "INFO")

    # eigenvalue acceptance for "Hurwitz"
    HURWITZ_TOL = float(os.getenv("KVBEAM_HURWITZ_TOL", "1e-10"))
    # allowed shortfall of a shifted Riccati design below its shift
    MARGIN_TOL = float(os.getenv("KVBEAM_MARGIN_TOL", "1e-6"))
    RESIDUAL_TOL = float(os.getenv("KVBEAM_RESIDUAL_TOL", "1e-8"))

    ZERO_THRESHOLD = float(os.getenv("KVBEAM_ZERO_THRESHOLD", "1e-8"))
    BC_TOL = float(os.getenv("KVBEAM_BC_TOL", "1e-8"))

    EPS_GRID = int(os.getenv("KVBEAM_EPS_GRID", "400"))
    EPS_MAX = float(os.getenv("KVBEAM_EPS_MAX", "1.0"))
    WORKERS = int(os.getenv("KVBEAM_WORKERS", "1"))
    POOR_MARGIN_RATIO = float(os.getenv("KVBEAM_POOR_MARGIN_RATIO", "0.1"))

    CSV_DIGITS = int(os.getenv("KVBEAM_CSV_DIGITS", "12"))
    OUT_DIR = os.getenv("KVBEAM_OUT_DIR", "out")


settings = Settings()
