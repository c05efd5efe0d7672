from __future__ import annotations
import asyncio
import inspect
import logging
import re
from collections import defaultdict, deque
from typing import Any, Awaitable, Callable, Dict, Deque, Optional, List, Tuple

logger = logging.getLogger(__name__)

CbType = Callable[[Any, int], Any]  # cb(payload, msg_id); sync ya da async


class EventBus:
    """
    Wildcard destekli asenkron EventBus. `msg_id` tabanlı dedupe içerir.

    Trainer her epoch sonunda metrikleri `metrics:{run}` topic'ine, epoch
    numarasını msg_id olarak vererek yayınlar. Sync callback'ler abonelik
    sırasıyla doğrudan çağrılır (CSV satır sırası deterministik kalsın diye);
    async callback'ler birlikte beklenir.

    Args:
        dedupe_window: Dedupe için tutulacak (topic, msg_id) halka tampon boyutu.

    Return:
        None
    """

    def __init__(self, *, dedupe_window: int = 8192) -> None:
        # liste: abonelik sırası korunur
        self._subs: Dict[str, List[CbType]] = defaultdict(list)
        self._glob_cache: Dict[str, re.Pattern] = {}
        self._lock = asyncio.Lock()
        self._next_id: int = 1

        # _seen: Son dedupe_window içindeki (topic, msg_id) çiftleri (O(1) kontrol).
        # _seen_order: FIFO sırası; pencere dolunca en eski çift _seen'den de silinir.
        self._seen: set = set()
        self._seen_order: Deque[Tuple[str, int]] = deque()
        self._dedupe_window = dedupe_window

    def _is_pattern(self, key: str) -> bool:
        """key içinde '*' var mı?"""
        return '*' in key

    def _compile(self, pattern: str) -> re.Pattern:
        """
        Glob benzeri pattern'i regex'e çevir.

        Args:
            pattern: '*' içerebilen desen.

        Return:
            re.Pattern: Derlenmiş regex.
        """
        if (rex := self._glob_cache.get(pattern)) is not None:
            return rex
        parts: List[str] = []
        for ch in pattern:
            parts.append('.*' if ch == '*' else re.escape(ch))
        rex = re.compile('^' + ''.join(parts) + '$')
        self._glob_cache[pattern] = rex
        return rex

    def subscribe(self, topic_or_pattern: str, cb: CbType) -> None:
        """
        Bir topic ya da desene callback ekler (aynı callback iki kez eklenmez).

        Args:
            topic_or_pattern: Tam topic veya '*' içeren desen.
            cb: 'cb(payload, msg_id)' imzalı fonksiyon.
        """
        subs = self._subs[topic_or_pattern]
        if cb not in subs:
            subs.append(cb)

    def unsubscribe(self, topic_or_pattern: str, cb: CbType) -> None:
        """
        Aboneliği kaldırır.

        Args:
            topic_or_pattern: Tam topic veya desen.
            cb: Kaldırılacak callback.
        """
        lst = self._subs.get(topic_or_pattern)
        if lst and cb in lst:
            lst.remove(cb)
            if not lst:
                self._subs.pop(topic_or_pattern, None)
        self._glob_cache.pop(topic_or_pattern, None)

    async def _next_msg_id(self) -> int:
        """Monoton artan bir msg_id üretir."""
        async with self._lock:
            mid = self._next_id
            self._next_id += 1
            return mid

    def _mark_seen(self, topic: str, msg_id: int) -> None:
        key = (topic, msg_id)
        self._seen.add(key)
        self._seen_order.append(key)
        while len(self._seen_order) > self._dedupe_window:
            old = self._seen_order.popleft()
            self._seen.discard(old)

    def _matching(self, topic: str) -> List[CbType]:
        callbacks: List[CbType] = []
        for key, cbs in list(self._subs.items()):
            if (self._is_pattern(key) and self._compile(key).match(topic)) or key == topic:
                callbacks.extend(cb for cb in cbs if cb not in callbacks)
        return callbacks

    async def publish(
        self,
        topic: str,
        payload: Any,
        *,
        msg_id: Optional[int] = None,
        dedupe: bool = False,
        strict: bool = False,
    ) -> int:
        """
        Eşleşen aboneleri çağır ve kullanılan msg_id'yi döndür.

        Callback hataları yayını durdurmaz; loglanır. strict=True ise tüm
        aboneler çağrıldıktan sonra ilk hata yeniden yükseltilir.

        Args:
            topic: Yayın topic'i.
            payload: Taşınan veri.
            msg_id: Dışarıdan gelen bir id; yoksa üretilecek.
            dedupe: True ise (topic, msg_id) tekrarları düşer.
            strict: True ise callback hatası yayından sonra yükseltilir.

        Return:
            int: Kullanılan msg_id.
        """
        if msg_id is None:
            msg_id = await self._next_msg_id()

        if dedupe and (topic, msg_id) in self._seen:
            return msg_id

        coros: List[Awaitable[None]] = []
        errors: List[Exception] = []
        for cb in self._matching(topic):
            if inspect.iscoroutinefunction(cb):
                coros.append(cb(payload, msg_id))
                continue
            try:
                cb(payload, msg_id)
            except Exception as e:
                logger.error("[EventBus] callback error on '%s': %s", topic, e)
                errors.append(e)

        if coros:
            results = await asyncio.gather(*coros, return_exceptions=True)
            for r in results:
                if isinstance(r, Exception):
                    logger.error("[EventBus] callback error on '%s': %s", topic, r)
                    errors.append(r)

        if dedupe:
            self._mark_seen(topic, msg_id)

        if strict and errors:
            raise errors[0]

        return msg_id
