"""
Configuration module for CircuitQL.
Centralizes all configuration settings from environment variables.
"""
import os


class Config:
    """Base configuration class."""

    # Circuit sizing
    MAX_TABLE_ROWS = int(os.getenv('MAX_TABLE_ROWS', str(1 << 16)))
    MIN_ROW_COUNT = int(os.getenv('MIN_ROW_COUNT', '512'))
    DEFAULT_LESS_THAN_BOUND_BITS = int(os.getenv('DEFAULT_LESS_THAN_BOUND_BITS', '64'))

    # Scan budgets: 0 means the next power of two of each table's row count
    DEFAULT_BUDGET = int(os.getenv('DEFAULT_BUDGET', '0'))

    # Fiat-Shamir transcript
    TRANSCRIPT_DOMAIN = os.getenv('TRANSCRIPT_DOMAIN', 'circuitql/v1')

    # Artifacts and run ledger
    OUTPUT_DIR = os.getenv('OUTPUT_DIR', 'runs')
    RUNS_DB_PATH = os.getenv('RUNS_DB_PATH', 'runs.json')

    # Storage backend
    STORAGE_BACKEND = os.getenv('STORAGE_BACKEND', 'local')  # 'local' or 's3'

    # S3 configuration (if using S3 backend)
    S3_BUCKET = os.getenv('S3_BUCKET')
    S3_ACCESS_KEY = os.getenv('S3_ACCESS_KEY')
    S3_SECRET_KEY = os.getenv('S3_SECRET_KEY')
    S3_REGION = os.getenv('S3_REGION', 'us-east-1')

    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')

    @classmethod
    def validate(cls):
        """
        Validate configuration values.

        Raises:
            ValueError: If configuration is missing or inconsistent
        """
        if cls.STORAGE_BACKEND == 's3':
            if not all([cls.S3_BUCKET, cls.S3_ACCESS_KEY, cls.S3_SECRET_KEY]):
                raise ValueError(
                    "S3 configuration incomplete. Required: S3_BUCKET, S3_ACCESS_KEY, S3_SECRET_KEY"
                )

        # The u8 table needs 256 rows plus one spare row that always reads zero
        if cls.MIN_ROW_COUNT <= 256 or cls.MIN_ROW_COUNT & (cls.MIN_ROW_COUNT - 1):
            raise ValueError("MIN_ROW_COUNT must be a power of two greater than 256")

        if cls.DEFAULT_LESS_THAN_BOUND_BITS % 8 or not 8 <= cls.DEFAULT_LESS_THAN_BOUND_BITS <= 128:
            raise ValueError("DEFAULT_LESS_THAN_BOUND_BITS must be a multiple of 8 between 8 and 128")

        if cls.MAX_TABLE_ROWS < 2:
            raise ValueError("MAX_TABLE_ROWS must be at least 2")

    @classmethod
    def get_display_info(cls) -> dict:
        """Settings as printed by `circuitql config`; S3 credentials are never included."""
        return {
            'storage_backend': cls.STORAGE_BACKEND,
            'output_dir': cls.OUTPUT_DIR if cls.STORAGE_BACKEND == 'local' else 'N/A',
            'runs_db_path': cls.RUNS_DB_PATH,
            'max_table_rows': cls.MAX_TABLE_ROWS,
            'min_row_count': cls.MIN_ROW_COUNT,
            'less_than_bound_bits': cls.DEFAULT_LESS_THAN_BOUND_BITS,
            'default_budget': cls.DEFAULT_BUDGET or 'auto',
            'transcript_domain': cls.TRANSCRIPT_DOMAIN,
            's3_configured': bool(cls.S3_BUCKET) if cls.STORAGE_BACKEND == 's3' else False,
            's3_region': cls.S3_REGION if cls.STORAGE_BACKEND == 's3' else 'N/A',
        }


class DevelopmentConfig(Config):
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'DEBUG')


class TestingConfig(Config):
    """Quiet by default; conftest.py points OUTPUT_DIR and RUNS_DB_PATH at a temporary directory."""
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'WARNING')


class ProductionConfig(Config):
    """Production runs keep artifacts at a fixed, absolute location."""

    @classmethod
    def validate(cls):
        super().validate()
        if cls.STORAGE_BACKEND == 'local' and not os.path.isabs(cls.OUTPUT_DIR):
            raise ValueError("OUTPUT_DIR must be an absolute path in production")


def get_config():
    """
    Get configuration based on CIRCUITQL_ENV environment variable.

    Returns:
        Config class appropriate for current environment
    """
    env = os.getenv('CIRCUITQL_ENV', 'development').lower()

    config_map = {
        'development': DevelopmentConfig,
        'testing': TestingConfig,
        'production': ProductionConfig,
    }

    return config_map.get(env, DevelopmentConfig)
