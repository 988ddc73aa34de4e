import pytest

from fusion_extractor import ImageEncoder, TemplateOcr, TextEncoder


@pytest.fixture(scope="session")
def template_ocr():
    return TemplateOcr()


@pytest.fixture(scope="session")
def text_encoder():
    return TextEncoder()


@pytest.fixture(scope="session")
def image_encoder():
    return ImageEncoder()
