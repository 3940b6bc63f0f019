from unittest import TestCase

from porowave.material import preset
from porowave.refelem import build_reference


class BaseTestCase(TestCase):
    def setUp(self):
        self.material = preset('sandstone_isotropic')
        self.ref = build_reference(2, 2)
