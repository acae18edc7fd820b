"""
Artifact storage for CircuitQL.
Bundles, manifests and commitments go through one interface backed by the
local filesystem or S3.
"""
import logging
import os
from abc import ABC, abstractmethod
from io import BytesIO
from typing import List

import boto3
from botocore.exceptions import ClientError
from werkzeug.utils import safe_join

from errors import StorageError

logger = logging.getLogger(__name__)


class ArtifactStore(ABC):
    """Abstract base class for artifact stores."""

    @property
    @abstractmethod
    def backend_type(self) -> str:
        """Return the type of storage backend ('local' or 's3')."""

    @abstractmethod
    def save(self, name: str, data: bytes) -> str:
        """
        Save an artifact and return its storage path.

        Args:
            name: Relative artifact name, e.g. "<run id>/bundle.public.json"
            data: Artifact contents

        Returns:
            Storage path/key for the saved artifact

        Raises:
            StorageError: If the save operation fails
        """

    @abstractmethod
    def load(self, name: str) -> bytes:
        """
        Raises:
            StorageError: If the artifact is missing or cannot be read
        """

    @abstractmethod
    def exists(self, name: str) -> bool:
        """Check whether an artifact exists."""

    @abstractmethod
    def list(self, prefix: str = '') -> List[str]:
        """Artifact names starting with prefix."""


class LocalArtifactStore(ArtifactStore):
    """Local filesystem artifact store."""

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        os.makedirs(self.output_dir, exist_ok=True)

    @property
    def backend_type(self) -> str:
        return 'local'

    def _path(self, name: str) -> str:
        path = safe_join(self.output_dir, name)
        if path is None:
            raise StorageError(f"invalid artifact name: {name}")
        return path

    def save(self, name: str, data: bytes) -> str:
        path = self._path(name)
        try:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, 'wb') as f:
                f.write(data)
        except OSError as e:
            raise StorageError(f"Failed to save artifact {name}: {e}") from e
        logger.debug("saved %s (%d bytes)", path, len(data))
        return path

    def load(self, name: str) -> bytes:
        path = self._path(name)
        try:
            with open(path, 'rb') as f:
                return f.read()
        except FileNotFoundError as e:
            raise StorageError(f"Artifact not found: {name}") from e
        except OSError as e:
            raise StorageError(f"Failed to read artifact {name}: {e}") from e

    def exists(self, name: str) -> bool:
        path = safe_join(self.output_dir, name)
        return path is not None and os.path.exists(path)

    def list(self, prefix: str = '') -> List[str]:
        names = []
        for root, _, files in os.walk(self.output_dir):
            for f in files:
                rel = os.path.relpath(os.path.join(root, f), self.output_dir).replace(os.sep, '/')
                if rel.startswith(prefix):
                    names.append(rel)
        return sorted(names)


class S3ArtifactStore(ArtifactStore):
    """Amazon S3 artifact store."""

    def __init__(self, bucket: str, access_key: str, secret_key: str, region: str = 'us-east-1'):
        self.bucket = bucket
        self.client = boto3.client(
            's3',
            aws_access_key_id=access_key,
            aws_secret_access_key=secret_key,
            region_name=region
        )
        self.region = region

    @property
    def backend_type(self) -> str:
        return 's3'

    @staticmethod
    def _key(name: str) -> str:
        return f"runs/{name}"

    def save(self, name: str, data: bytes) -> str:
        key = self._key(name)
        try:
            self.client.upload_fileobj(BytesIO(data), self.bucket, key)
        except ClientError as e:
            raise StorageError(f"S3 upload failed for {name}: {e}") from e
        return key

    def load(self, name: str) -> bytes:
        key = self._key(name)
        try:
            response = self.client.get_object(Bucket=self.bucket, Key=key)
            return response['Body'].read()
        except ClientError as e:
            if e.response['Error']['Code'] == 'NoSuchKey':
                raise StorageError(f"Artifact not found in S3: {key}") from e
            raise StorageError(f"S3 retrieval failed for {key}: {e}") from e

    def exists(self, name: str) -> bool:
        try:
            self.client.head_object(Bucket=self.bucket, Key=self._key(name))
            return True
        except ClientError:
            return False

    def list(self, prefix: str = '') -> List[str]:
        response = self.client.list_objects_v2(Bucket=self.bucket, Prefix=self._key(prefix))
        strip = len(self._key(''))
        return sorted(obj['Key'][strip:] for obj in response.get('Contents', []))


def get_artifact_store(config) -> ArtifactStore:
    """
    Factory function to create the configured artifact store.

    Args:
        config: Configuration class or dict with storage settings

    Raises:
        ValueError: If the storage backend configuration is invalid
    """
    def setting(name, default=None):
        if isinstance(config, dict):
            return config.get(name, default)
        return getattr(config, name, default)

    backend_type = setting('STORAGE_BACKEND', 'local')

    if backend_type == 's3':
        bucket = setting('S3_BUCKET')
        access_key = setting('S3_ACCESS_KEY')
        secret_key = setting('S3_SECRET_KEY')
        if not all([bucket, access_key, secret_key]):
            raise ValueError("S3 configuration incomplete")
        return S3ArtifactStore(bucket, access_key, secret_key, setting('S3_REGION', 'us-east-1'))

    if backend_type == 'local':
        return LocalArtifactStore(setting('OUTPUT_DIR', 'runs'))

    raise ValueError(f"Unknown storage backend: {backend_type}")
