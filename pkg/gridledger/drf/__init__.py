from .fields import EnumField
from .serializers import EnumSupportSerializerMixin

__all__ = ['EnumField', 'EnumSupportSerializerMixin']
